#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stg/centroid.hpp"
#include "stg/util.hpp"

namespace stg {

// Symmetric labeled distance matrix with a zero diagonal.
struct DistanceMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;

    int size() const { return static_cast<int>(labels.size()); }

    void check() const {
        const int n = size();
        if (static_cast<int>(values.size()) != n)
            throw InputError("distance matrix is not square");
        for (const auto& row : values)
            if (static_cast<int>(row.size()) != n)
                throw InputError("distance matrix is not square");
        for (int i = 0; i < n; ++i) {
            if (values[i][i] != 0.0) throw InputError("distance matrix diagonal must be zero");
            for (int j = 0; j < n; ++j) {
                if (values[i][j] < 0) throw InputError("distances must be non-negative");
                if (std::abs(values[i][j] - values[j][i]) > 1e-9)
                    throw InputError("distance matrix is not symmetric");
            }
        }
    }

    // Averages the off-diagonal pair (i, j)/(j, i); forgives drift below tol.
    void symmetrize() {
        const int n = size();
        for (int i = 0; i < n; ++i) {
            values[i][i] = 0.0;
            for (int j = i + 1; j < n; ++j) {
                double m = (values[i][j] + values[j][i]) / 2.0;
                values[i][j] = values[j][i] = m;
            }
        }
    }

    // Vectorized strict upper triangle, row-major.
    std::vector<double> upper() const {
        std::vector<double> v;
        const int n = size();
        v.reserve(static_cast<size_t>(n) * (n - 1) / 2);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) v.push_back(values[i][j]);
        return v;
    }
};

inline std::string matrix_to_csv(const DistanceMatrix& m) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (int j = 0; j < m.size(); ++j) os << (j ? "," : "") << m.labels[j];
    os << "\n";
    for (int i = 0; i < m.size(); ++i) {
        for (int j = 0; j < m.size(); ++j) os << (j ? "," : "") << m.values[i][j];
        os << "\n";
    }
    return os.str();
}

inline DistanceMatrix matrix_from_csv(const std::string& csv) {
    DistanceMatrix m;
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line)) throw InputError("empty distance matrix CSV");
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) m.labels.push_back(cell);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream rs(line);
        std::vector<double> row;
        while (std::getline(rs, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw InputError("bad number in distance matrix CSV: " + cell);
            }
        }
        m.values.push_back(std::move(row));
    }
    m.check();
    return m;
}

// Element-wise mean of the matrices, then min-max scaled to [0, 1] over the
// off-diagonal entries. The diagonal stays zero.
inline DistanceMatrix mean_normalize(const std::vector<DistanceMatrix>& mats) {
    if (mats.empty()) throw InputError("no matrices to average");
    for (const auto& m : mats) {
        m.check();
        if (m.labels != mats[0].labels)
            throw InputError("matrices do not share labels");
    }
    DistanceMatrix out = mats[0];
    const int n = out.size();
    if (n < 2) throw InputError("distance matrix needs at least two entries");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (const auto& m : mats) s += m.values[i][j];
            out.values[i][j] = s / static_cast<double>(mats.size());
        }
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) {
                mn = std::min(mn, out.values[i][j]);
                mx = std::max(mx, out.values[i][j]);
            }
    if (!(mx > mn)) throw InputError("constant off-diagonal: nothing to normalize");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) out.values[i][j] = (out.values[i][j] - mn) / (mx - mn);
    return out;
}

namespace stats_detail {

// Average ranks (1-based) with ties sharing their mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double mean_rank = (i + j) / 2.0 + 1.0;
        for (int t = i; t <= j; ++t) r[idx[t]] = mean_rank;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) throw InputError("degenerate matrix: constant upper triangle");
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

}  // namespace stats_detail

struct MantelResult {
    double rho = 0;
    double p_value = 1;
};

// Mantel test with Spearman correlation over the strict upper triangles.
// Replicates permute b's rows and columns jointly; the two-sided p-value is
// the fraction of replicates (identity included) at least as extreme as the
// observed statistic. When every joint permutation fits within the replicate
// budget the test enumerates them all, making the p-value exact.
inline MantelResult mantel_spearman(const DistanceMatrix& a, const DistanceMatrix& b,
                                    int permutations = 9999, uint64_t seed = 0,
                                    int workers = 1) {
    a.check();
    b.check();
    if (a.labels != b.labels) throw InputError("matrices do not share labels");
    if (permutations < 1) throw ConfigError("permutation count must be >= 1");
    const int n = a.size();
    if (n < 3) throw InputError("Mantel test needs at least a 3x3 matrix");

    const auto ranks_a = stats_detail::average_ranks(a.upper());
    const double observed = stats_detail::pearson(ranks_a, stats_detail::average_ranks(b.upper()));

    auto rho_under = [&](const std::vector<int>& perm) {
        std::vector<double> v;
        v.reserve(ranks_a.size());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) v.push_back(b.values[perm[i]][perm[j]]);
        return stats_detail::pearson(ranks_a, stats_detail::average_ranks(v));
    };

    uint64_t factorial = 1;
    for (int i = 2; i <= n && factorial <= static_cast<uint64_t>(permutations); ++i)
        factorial *= i;

    MantelResult r;
    r.rho = observed;
    if (factorial <= static_cast<uint64_t>(permutations)) {
        // exhaustive: every joint permutation once, identity among them
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        uint64_t count = 0;
        do {
            if (std::abs(rho_under(perm)) >= std::abs(observed) - 1e-12) ++count;
        } while (std::next_permutation(perm.begin(), perm.end()));
        r.p_value = static_cast<double>(count) / static_cast<double>(factorial);
        return r;
    }

    std::vector<int> extreme(permutations, 0);
    parallel_for(permutations, workers, [&](int t) {
        Rng rng(sub_seed(seed, 0x3a7e, t));
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        extreme[t] = std::abs(rho_under(perm)) >= std::abs(observed) - 1e-12 ? 1 : 0;
    });
    int count = 1 + std::accumulate(extreme.begin(), extreme.end(), 0);  // identity replicate
    r.p_value = static_cast<double>(count) / static_cast<double>(permutations + 1);
    return r;
}

}  // namespace stg
