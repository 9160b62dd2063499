#ifndef DDMC_MODEL_IO_HPP
#define DDMC_MODEL_IO_HPP

#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>

#include "ddmc/model.hpp"

namespace ddmc {

/// Model definition document:
///   {"name": "logistic", "params": {"p": 2, "q": 1}}
/// or
///   {"custom": {"d": 1, "jumps": [[1],[-1]],
///               "rates": [{"coeffs": [{"exps": [1], "c": 2.0}], "clamp": true}, ...]},
///    "domain": {"lo": [0], "hi": [10], "simplex": false}}
inline Model model_from_json(const nlohmann::json& j) {
    if (j.contains("name")) {
        std::map<std::string, double> params;
        if (j.contains("params"))
            for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it)
                params[it.key()] = it.value().get<double>();
        return make_catalog_model(j.at("name").get<std::string>(), params);
    }
    if (!j.contains("custom"))
        throw std::invalid_argument("model document: needs either 'name' or 'custom'");
    const auto& c = j.at("custom");
    Model m;
    m.name = c.value("label", std::string("custom"));
    m.d = c.at("d").get<int>();
    if (m.d < 1) throw std::invalid_argument("model document: d must be positive");
    for (const auto& jv : c.at("jumps")) {
        IVec e(m.d);
        if (int(jv.size()) != m.d)
            throw std::invalid_argument("model document: jump dimension mismatch");
        bool zero = true;
        for (int i = 0; i < m.d; ++i) {
            e[i] = jv.at(std::size_t(i)).get<std::int64_t>();
            zero = zero && e[i] == 0;
        }
        if (zero) throw std::invalid_argument("model document: zero jump vector");
        m.jumps.push_back(e);
    }
    if (m.jumps.empty()) throw std::invalid_argument("model document: jumps list is empty");
    for (const auto& jr : c.at("rates")) {
        PolynomialRate rate;
        rate.clamp = jr.value("clamp", true);
        for (const auto& jt : jr.at("coeffs")) {
            PolynomialRate::Term term;
            term.coeff = jt.at("c").get<double>();
            for (const auto& e : jt.at("exps")) term.exps.push_back(e.get<int>());
            if (int(term.exps.size()) != m.d)
                throw std::invalid_argument("model document: exponent dimension mismatch");
            rate.terms.push_back(term);
        }
        m.rates.push_back(rate);
    }
    if (m.rates.size() != m.jumps.size())
        throw std::invalid_argument("model document: one rate per jump required");
    if (!j.contains("domain"))
        throw std::invalid_argument("model document: custom models need a domain");
    const auto& jd = j.at("domain");
    Vec lo(m.d), hi(m.d);
    for (int i = 0; i < m.d; ++i) {
        lo[i] = jd.at("lo").at(std::size_t(i)).get<double>();
        hi[i] = jd.at("hi").at(std::size_t(i)).get<double>();
    }
    m.domain = Domain::box(lo, hi, jd.value("simplex", false));
    m.fd_gradients = c.value("fd_gradients", false);
    return m;
}

inline nlohmann::json model_to_json(const Model& m) {
    nlohmann::json j;
    if (m.name == "logistic" || m.name == "sirs") {
        j["name"] = m.name;
        j["params"] = m.params;
        return j;
    }
    nlohmann::json c;
    c["label"] = m.name;
    c["d"] = m.d;
    for (const auto& e : m.jumps) {
        nlohmann::json je = nlohmann::json::array();
        for (int i = 0; i < m.d; ++i) je.push_back(e[i]);
        c["jumps"].push_back(je);
    }
    for (const auto& r : m.rates) {
        nlohmann::json jr;
        jr["clamp"] = r.clamp;
        jr["coeffs"] = nlohmann::json::array();
        for (const auto& t : r.terms) jr["coeffs"].push_back({{"exps", t.exps}, {"c", t.coeff}});
        c["rates"].push_back(jr);
    }
    if (m.fd_gradients) c["fd_gradients"] = true;
    j["custom"] = c;
    j["domain"] = {{"lo", std::vector<double>(m.domain.lo.data(), m.domain.lo.data() + m.d)},
                   {"hi", std::vector<double>(m.domain.hi.data(), m.domain.hi.data() + m.d)},
                   {"simplex", m.domain.simplex}};
    return j;
}

inline Model load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace ddmc

#endif
