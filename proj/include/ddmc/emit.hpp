#ifndef DDMC_EMIT_HPP
#define DDMC_EMIT_HPP

#include <string>

#include "ddmc/io.hpp"
#include "ddmc/simulate.hpp"

namespace ddmc {

/// Grid rows of a coupled path: t, X_1..X_d, Z_1..Z_d, gap.
inline std::string coupled_path_csv(const CoupledPath& path) {
    const int d = int(path.X.empty() ? 0 : path.X[0].size());
    std::vector<std::string> cols{"t"};
    for (int i = 1; i <= d; ++i) cols.push_back("X_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) cols.push_back("Z_" + std::to_string(i));
    cols.push_back("gap");
    io::Csv csv(cols);
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        std::vector<double> row{path.times[k]};
        for (int i = 0; i < d; ++i) row.push_back(path.X[k][i]);
        for (int i = 0; i < d; ++i) row.push_back(path.Z[k][i]);
        row.push_back((path.X[k] - path.Z[k]).norm());
        csv.row(row);
    }
    return csv.str();
}

}  // namespace ddmc

#endif
