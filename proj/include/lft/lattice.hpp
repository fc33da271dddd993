#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lft/errors.hpp"

namespace lft {

// ---------------------------------------------------------------------------
// Geometry and fields
// ---------------------------------------------------------------------------

/// Periodic 2-D lattice. dims = (L0, L1); for the graphene-wire task the
/// first direction is Euclidean time. Site ordering is row-major over
/// (dim0, dim1) everywhere, including on-disk formats.
struct LatticeGeometry {
    std::array<int, 2> dims{0, 0};
    double spacing = 1.0;

    int volume() const { return dims[0] * dims[1]; }

    /// Flat index with periodic wraparound in both directions.
    int site(int i, int j) const {
        const int a = wrap(i, dims[0]);
        const int b = wrap(j, dims[1]);
        return a * dims[1] + b;
    }

    static int wrap(int k, int extent) {
        int m = k % extent;
        return m < 0 ? m + extent : m;
    }

    void validate() const;

    bool operator==(const LatticeGeometry& o) const {
        return dims == o.dims && spacing == o.spacing;
    }
};

/// Real scalar field, one 64-bit value per site, row-major.
struct FieldConfiguration {
    LatticeGeometry geometry;
    std::vector<double> values;

    static FieldConfiguration zeros(const LatticeGeometry& g) {
        return FieldConfiguration{g, std::vector<double>(static_cast<size_t>(g.volume()), 0.0)};
    }

    double& at(int i, int j) { return values[static_cast<size_t>(geometry.site(i, j))]; }
    double at(int i, int j) const { return values[static_cast<size_t>(geometry.site(i, j))]; }

    /// Throws InvalidInputError on size mismatch or non-finite entries.
    void validate() const;
};

/// Checkerboard mask bits, one {0,1} per site.
struct Mask {
    LatticeGeometry geometry;
    std::vector<uint8_t> bits;
};

// ---------------------------------------------------------------------------
// Action parameters
// ---------------------------------------------------------------------------

struct Phi4Params {
    double m2 = -4.0;     // bare mass squared
    double lambda = 5.0;  // quartic coupling, > 0
};

struct GrapheneParams {
    double g = 1.0;       // coupling, > 0
    double u = 0.1;       // cosine-term strength (linear in the fermion mass)
    int mass_sign = +1;   // sign of the (g phi)^2/(2 pi) term; -1 reproduces
                          // the printed (non-normalizable) variant
};

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

/// phi^4: S = sum_n phi(n)[sum_mu 2 phi(n) - phi(n+mu) - phi(n-mu)]
///            + m^2 phi(n)^2 + lambda phi(n)^4, periodic boundaries.
double phi4_action(const FieldConfiguration& cfg, const Phi4Params& p);

/// Bosonized graphene wire on an L_tau x L_x lattice with forward
/// differences: S = sum 1/2 (d_tau phi)^2 + 1/2 (d_x phi)^2
///                  + mass_sign (g phi)^2/(2 pi) - u cos(2 sqrt(pi) phi).
double graphene_action(const FieldConfiguration& cfg, const GrapheneParams& p);

FieldConfiguration phi4_gradient(const FieldConfiguration& cfg, const Phi4Params& p);
FieldConfiguration graphene_gradient(const FieldConfiguration& cfg, const GrapheneParams& p);

enum class ActionKind { phi4, graphene };

/// Action selector bundling the kind with its parameters; the single
/// object samplers and training are handed.
class LatticeAction {
public:
    explicit LatticeAction(Phi4Params p) : params_(p) {}
    explicit LatticeAction(GrapheneParams p) : params_(p) {}

    ActionKind kind() const {
        return std::holds_alternative<Phi4Params>(params_) ? ActionKind::phi4
                                                           : ActionKind::graphene;
    }

    double value(const FieldConfiguration& cfg) const;
    FieldConfiguration gradient(const FieldConfiguration& cfg) const;

    const Phi4Params& phi4() const { return std::get<Phi4Params>(params_); }
    const GrapheneParams& graphene() const { return std::get<GrapheneParams>(params_); }

private:
    std::variant<Phi4Params, GrapheneParams> params_;
};

/// Gradient dS/dphi per site for the selected action. Matches central
/// finite differences of the action.
FieldConfiguration action_gradient(const FieldConfiguration& cfg, const LatticeAction& action);

// ---------------------------------------------------------------------------
// Masks and field surgery
// ---------------------------------------------------------------------------

/// M^t_{i,j} = (t mod 2) if (i+j) even else 1 - (t mod 2).
Mask checkerboard_mask(const LatticeGeometry& g, int t);

/// (x_a, x_b) = (x . M, x . (1-M)).
std::pair<FieldConfiguration, FieldConfiguration>
split_by_mask(const FieldConfiguration& cfg, const Mask& mask);

/// Cyclic shift of every site by `offset` (periodic).
FieldConfiguration translate(const FieldConfiguration& cfg, const std::array<int, 2>& offset);

} // namespace lft
