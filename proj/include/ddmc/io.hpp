#ifndef DDMC_IO_HPP
#define DDMC_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddmc::io {

/// Write a file atomically: stream into `<path>.tmp`, then rename. An
/// interrupted run never leaves a partial file at the final path.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Row-oriented CSV builder with a fixed header. Numeric cells are printed
/// with enough digits to round-trip doubles.
class Csv {
  public:
    explicit Csv(const std::vector<std::string>& columns) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) body_ += ',';
            body_ += columns[i];
        }
        body_ += '\n';
        ncols_ = columns.size();
    }

    void row(const std::vector<double>& values) {
        if (values.size() != ncols_) throw std::invalid_argument("Csv: column count mismatch");
        char buf[32];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) body_ += ',';
            std::snprintf(buf, sizeof buf, "%.17g", values[i]);
            body_ += buf;
        }
        body_ += '\n';
    }

    const std::string& str() const { return body_; }

    void write(const std::filesystem::path& path) const { atomic_write(path, body_); }

  private:
    std::string body_;
    std::size_t ncols_ = 0;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

}  // namespace ddmc::io

#endif
