#include "lft/observables.hpp"

#include <algorithm>
#include <cmath>

#include "lft/rng.hpp"

namespace lft {

namespace {

constexpr double kEulerGamma = 0.5772156649015329;

void require_nonempty(const Ensemble& ens) {
    if (ens.configs.empty()) throw InvalidInputError("observable: empty ensemble");
}

} // namespace

MagnetizationResult magnetization(const Ensemble& ens) {
    require_nonempty(ens);
    MagnetizationResult r;
    const double V = static_cast<double>(ens.geometry.volume());
    r.per_config.reserve(ens.configs.size());
    for (const auto& c : ens.configs) {
        double s = 0.0;
        for (double v : c.values) s += v;
        r.per_config.push_back(s / V);
    }
    for (double m : r.per_config) {
        r.mean += m;
        r.mean_abs += std::abs(m);
    }
    r.mean /= static_cast<double>(r.per_config.size());
    r.mean_abs /= static_cast<double>(r.per_config.size());
    return r;
}

Series autocorrelation(const Series& series, int t_max) {
    const int n = static_cast<int>(series.size());
    if (t_max < 0 || n <= t_max)
        throw InvalidInputError("autocorrelation: series length must exceed t_max");
    Series c(static_cast<size_t>(t_max) + 1, 0.0);
    for (int t = 0; t <= t_max; ++t) {
        const int m = n - t;
        double cross = 0.0, head = 0.0, tail = 0.0;
        for (int i = 0; i < m; ++i) {
            cross += series[static_cast<size_t>(i)] * series[static_cast<size_t>(i + t)];
            head += series[static_cast<size_t>(i)];
            tail += series[static_cast<size_t>(i + t)];
        }
        c[static_cast<size_t>(t)] = cross / m - (head / m) * (tail / m);
    }
    if (c[0] == 0.0) throw DegenerateSeriesError("autocorrelation: zero-variance series");
    return c;
}

double tau_int(const Series& series, int window) {
    const int n = static_cast<int>(series.size());
    const int cap = std::max(1, n / 10);
    const int t_max = window >= 1 ? std::min(window, n - 1) : cap;
    const Series c = autocorrelation(series, t_max);

    if (window >= 1) {
        double tau = 0.5;
        for (int t = 1; t <= t_max; ++t) tau += c[static_cast<size_t>(t)] / c[0];
        return tau;
    }
    // automatic window: smallest T_w with T_w >= 5 tau(T_w)
    double tau = 0.5;
    for (int t = 1; t <= t_max; ++t) {
        tau += c[static_cast<size_t>(t)] / c[0];
        if (t >= 5.0 * tau) return tau;
    }
    return tau;
}

CorrelatorTable connected_two_point(const Ensemble& ens) {
    require_nonempty(ens);
    if (ens.configs.size() < 2)
        throw InsufficientDataError("connected_two_point: need at least 2 configurations");
    const LatticeGeometry g = ens.geometry;
    const int L0 = g.dims[0], L1 = g.dims[1], V = g.volume();
    const double N = static_cast<double>(ens.configs.size());

    std::vector<double> mean(static_cast<size_t>(V), 0.0);
    for (const auto& c : ens.configs)
        for (int k = 0; k < V; ++k) mean[static_cast<size_t>(k)] += c.values[static_cast<size_t>(k)];
    for (double& m : mean) m /= N;

    CorrelatorTable table{g, std::vector<double>(static_cast<size_t>(V), 0.0)};
    for (int d0 = 0; d0 < L0; ++d0) {
        for (int d1 = 0; d1 < L1; ++d1) {
            double acc = 0.0;
            for (const auto& c : ens.configs) {
                double s = 0.0;
                for (int i = 0; i < L0; ++i)
                    for (int j = 0; j < L1; ++j) s += c.at(i, j) * c.at(i + d0, j + d1);
                acc += s;
            }
            double sub = 0.0;
            for (int i = 0; i < L0; ++i)
                for (int j = 0; j < L1; ++j)
                    sub += mean[static_cast<size_t>(g.site(i, j))] *
                           mean[static_cast<size_t>(g.site(i + d0, j + d1))];
            table.values[static_cast<size_t>(g.site(d0, d1))] = (acc / N - sub) / V;
        }
    }
    return table;
}

std::vector<double> zero_momentum_correlator(const Ensemble& ens) {
    const CorrelatorTable table = connected_two_point(ens);
    const int L0 = ens.geometry.dims[0], L1 = ens.geometry.dims[1];
    std::vector<double> g(static_cast<size_t>(L0), 0.0);
    for (int t = 0; t < L0; ++t) {
        double s = 0.0;
        for (int x = 0; x < L1; ++x) s += table.at(t, x);
        g[static_cast<size_t>(t)] = s / L1;
    }
    return g;
}

double susceptibility(const Ensemble& ens) {
    const CorrelatorTable table = connected_two_point(ens);
    double chi = 0.0;
    for (double v : table.values) chi += v;
    return chi;
}

double ising_energy(const Ensemble& ens) {
    const CorrelatorTable table = connected_two_point(ens);
    return 0.5 * (table.at(1, 0) + table.at(0, 1));
}

CorrelationLength correlation_length_from(const std::vector<double>& corr) {
    const int L = static_cast<int>(corr.size());
    CorrelationLength r;
    double acc = 0.0;
    for (int x = 1; x + 1 < L; ++x) {
        const double denom = 2.0 * corr[static_cast<size_t>(x)];
        if (denom == 0.0) {
            ++r.skipped_terms;
            continue;
        }
        const double arg = (corr[static_cast<size_t>(x + 1)] + corr[static_cast<size_t>(x - 1)]) / denom;
        if (!std::isfinite(arg) || arg < 1.0) {
            ++r.skipped_terms;
            continue;
        }
        acc += std::acosh(arg);
        ++r.used_terms;
    }
    if (r.used_terms == 0)
        throw UndefinedLengthError("correlation_length: every arcosh term out of domain");
    r.inv_xi = acc / r.used_terms;
    r.xi = 1.0 / r.inv_xi;
    return r;
}

CorrelationLength correlation_length(const Ensemble& ens) {
    return correlation_length_from(zero_momentum_correlator(ens));
}

MassGapFit mass_gap_fit(const std::vector<double>& corr, int t_lo, int t_hi) {
    const int L = static_cast<int>(corr.size());
    if (t_hi < 0) t_hi = std::max(3, L / 4);
    t_hi = std::min(t_hi, L - 1);
    std::vector<double> ts, ys;
    for (int t = t_lo; t <= t_hi; ++t)
        if (corr[static_cast<size_t>(t)] > 0.0) {
            ts.push_back(static_cast<double>(t));
            ys.push_back(std::log(corr[static_cast<size_t>(t)]));
        }
    const int n = static_cast<int>(ts.size());
    if (n < 3)
        throw FitDomainError("mass_gap_fit: fewer than 3 positive correlator values in the window");

    double tm = 0.0, ym = 0.0;
    for (int i = 0; i < n; ++i) {
        tm += ts[static_cast<size_t>(i)];
        ym += ys[static_cast<size_t>(i)];
    }
    tm /= n;
    ym /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (ts[static_cast<size_t>(i)] - tm) * (ts[static_cast<size_t>(i)] - tm);
        sxy += (ts[static_cast<size_t>(i)] - tm) * (ys[static_cast<size_t>(i)] - ym);
    }
    const double slope = sxy / sxx;
    double ss_res = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = ys[static_cast<size_t>(i)] - (ym + slope * (ts[static_cast<size_t>(i)] - tm));
        ss_res += r * r;
    }
    MassGapFit fit;
    fit.m_gap = -slope;
    fit.points_used = n;
    fit.std_error = n > 2 ? std::sqrt(ss_res / (n - 2) / sxx) : 0.0;
    return fit;
}

MassGapFit mass_gap(const Ensemble& ens) {
    return mass_gap_fit(zero_momentum_correlator(ens));
}

double chiral_condensate(const Ensemble& ens, double g, double prefactor) {
    require_nonempty(ens);
    (void)g; // the printed g * O(1/g) = g * (prefactor/g) cancels
    const double k = 2.0 * std::sqrt(M_PI);
    double acc = 0.0;
    int64_t count = 0;
    for (const auto& c : ens.configs) {
        for (double v : c.values) acc += std::cos(k * v);
        count += static_cast<int64_t>(c.values.size());
    }
    const double mean_cos = acc / static_cast<double>(count);
    return -std::exp(kEulerGamma) / (2.0 * std::pow(M_PI, 1.5)) * prefactor * mean_cos;
}

std::pair<double, double>
bootstrap_error(int n_samples, const std::function<double(const std::vector<int>&)>& estimator,
                int resamples, uint64_t seed) {
    if (n_samples < 10) throw InsufficientDataError("bootstrap: need at least 10 samples");
    if (resamples < 2) throw InvalidInputError("bootstrap: need at least 2 resamples");
    Rng rng(derive_seed(seed, 0xb007));
    std::vector<double> est(static_cast<size_t>(resamples));
    std::vector<int> idx(static_cast<size_t>(n_samples));
    for (int r = 0; r < resamples; ++r) {
        for (int& k : idx) k = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(n_samples));
        est[static_cast<size_t>(r)] = estimator(idx);
    }
    double mean = 0.0;
    for (double e : est) mean += e;
    mean /= resamples;
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    return {mean, std::sqrt(var / (resamples - 1))};
}

std::pair<double, double> bootstrap_mean_error(const Series& values, int resamples, uint64_t seed) {
    return bootstrap_error(
        static_cast<int>(values.size()),
        [&values](const std::vector<int>& idx) {
            double s = 0.0;
            for (int k : idx) s += values[static_cast<size_t>(k)];
            return s / static_cast<double>(idx.size());
        },
        resamples, seed);
}

std::pair<double, double>
bootstrap_observable(const Ensemble& ens, const std::function<double(const Ensemble&)>& estimator,
                     int resamples, uint64_t seed) {
    return bootstrap_error(
        static_cast<int>(ens.size()),
        [&](const std::vector<int>& idx) {
            Ensemble sub;
            sub.geometry = ens.geometry;
            sub.sampler = ens.sampler;
            sub.seed = ens.seed;
            sub.configs.reserve(idx.size());
            sub.entries.reserve(idx.size());
            for (int k : idx) {
                sub.configs.push_back(ens.configs[static_cast<size_t>(k)]);
                sub.entries.push_back(ens.entries[static_cast<size_t>(k)]);
            }
            return estimator(sub);
        },
        resamples, seed);
}

} // namespace lft
