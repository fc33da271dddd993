#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "lft/samplers.hpp"

namespace lft {

/// One scalar observable per chain step.
using Series = std::vector<double>;

struct MagnetizationResult {
    Series per_config; // volume average of each configuration
    double mean = 0.0;     // M
    double mean_abs = 0.0; // |M|
};

MagnetizationResult magnetization(const Ensemble& ens);

/// C_O(t) for t = 0..t_max, each averaged over available start times with
/// separate means for the two ends. Throws DegenerateSeriesError when the
/// series has zero variance.
Series autocorrelation(const Series& series, int t_max);

/// tau_int = 1/2 + sum_{t=1}^{T_w} C(t)/C(0). window < 0 selects the
/// smallest T_w with T_w >= 5 tau(T_w), capped at length/10.
double tau_int(const Series& series, int window = -1);

/// Translation-averaged connected correlator over all 2-D separations.
struct CorrelatorTable {
    LatticeGeometry geometry;
    std::vector<double> values; // flat separation index dx0 * L1 + dx1

    double at(int dx0, int dx1) const {
        return values[static_cast<size_t>(geometry.site(dx0, dx1))];
    }
};

CorrelatorTable connected_two_point(const Ensemble& ens);

/// G_c(0, t): spatial-slice averages correlated across separation t along
/// the first axis.
std::vector<double> zero_momentum_correlator(const Ensemble& ens);

double susceptibility(const Ensemble& ens); // chi_2 = sum_x C(x)
double ising_energy(const Ensemble& ens);   // (1/d) sum_mu C(mu-hat)

struct CorrelationLength {
    double inv_xi = 0.0;
    double xi = 0.0;
    int used_terms = 0;
    int skipped_terms = 0; // arcosh arguments below 1 (noise)
};

/// arcosh estimator on a correlator sequence; out-of-domain terms are
/// skipped and the average renormalized by the used count.
CorrelationLength correlation_length_from(const std::vector<double>& corr);
CorrelationLength correlation_length(const Ensemble& ens);

struct MassGapFit {
    double m_gap = 0.0;
    double std_error = 0.0;
    int points_used = 0;
};

/// Least-squares fit of ln G(t) against t on [t_lo, t_hi]; t_hi < 0 picks
/// max(3, L_t/4). Needs >= 3 slices with positive correlator values.
MassGapFit mass_gap_fit(const std::vector<double>& corr, int t_lo = 1, int t_hi = -1);
MassGapFit mass_gap(const Ensemble& ens);

/// -(e^gamma / (2 pi^{3/2})) * prefactor * <cos(2 sqrt(pi) phi)>; the
/// printed g * O(1/g) cancels, so g only documents provenance.
double chiral_condensate(const Ensemble& ens, double g, double prefactor = 10.0);

/// Nonparametric bootstrap over sample indices: returns (mean of the
/// resampled estimates, their standard deviation).
std::pair<double, double>
bootstrap_error(int n_samples, const std::function<double(const std::vector<int>&)>& estimator,
                int resamples, uint64_t seed);

/// Bootstrap of a plain series mean.
std::pair<double, double> bootstrap_mean_error(const Series& values, int resamples, uint64_t seed);

/// Bootstrap over whole configurations: resamples the ensemble with
/// replacement and applies the estimator to each resample.
std::pair<double, double>
bootstrap_observable(const Ensemble& ens, const std::function<double(const Ensemble&)>& estimator,
                     int resamples, uint64_t seed);

} // namespace lft
