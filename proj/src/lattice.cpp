#include "lft/lattice.hpp"

#include <cmath>

namespace lft {

void LatticeGeometry::validate() const {
    if (dims[0] < 1 || dims[1] < 1)
        throw InvalidInputError("lattice extents must be >= 1");
}

void FieldConfiguration::validate() const {
    geometry.validate();
    if (static_cast<int>(values.size()) != geometry.volume())
        throw InvalidInputError("field value count does not match lattice volume");
    for (double v : values)
        if (!std::isfinite(v))
            throw InvalidInputError("non-finite field value");
}

double phi4_action(const FieldConfiguration& cfg, const Phi4Params& p) {
    cfg.validate();
    const int L0 = cfg.geometry.dims[0], L1 = cfg.geometry.dims[1];
    double s = 0.0;
    for (int i = 0; i < L0; ++i) {
        for (int j = 0; j < L1; ++j) {
            const double phi = cfg.at(i, j);
            double kin = 0.0;
            kin += 2.0 * phi - cfg.at(i + 1, j) - cfg.at(i - 1, j);
            kin += 2.0 * phi - cfg.at(i, j + 1) - cfg.at(i, j - 1);
            const double phi2 = phi * phi;
            s += phi * kin + p.m2 * phi2 + p.lambda * phi2 * phi2;
        }
    }
    return s;
}

double graphene_action(const FieldConfiguration& cfg, const GrapheneParams& p) {
    cfg.validate();
    const int Lt = cfg.geometry.dims[0], Lx = cfg.geometry.dims[1];
    const double mass_coeff = p.mass_sign * p.g * p.g / (2.0 * M_PI);
    const double k = 2.0 * std::sqrt(M_PI);
    double s = 0.0;
    for (int t = 0; t < Lt; ++t) {
        for (int x = 0; x < Lx; ++x) {
            const double phi = cfg.at(t, x);
            const double dt = cfg.at(t + 1, x) - phi; // forward difference, periodic
            const double dx = cfg.at(t, x + 1) - phi;
            s += 0.5 * dt * dt + 0.5 * dx * dx + mass_coeff * phi * phi
                 - p.u * std::cos(k * phi);
        }
    }
    return s;
}

FieldConfiguration phi4_gradient(const FieldConfiguration& cfg, const Phi4Params& p) {
    cfg.validate();
    const int L0 = cfg.geometry.dims[0], L1 = cfg.geometry.dims[1];
    FieldConfiguration g = FieldConfiguration::zeros(cfg.geometry);
    for (int i = 0; i < L0; ++i) {
        for (int j = 0; j < L1; ++j) {
            const double phi = cfg.at(i, j);
            const double nb = cfg.at(i + 1, j) + cfg.at(i - 1, j)
                            + cfg.at(i, j + 1) + cfg.at(i, j - 1);
            g.at(i, j) = 8.0 * phi - 2.0 * nb + 2.0 * p.m2 * phi
                       + 4.0 * p.lambda * phi * phi * phi;
        }
    }
    return g;
}

FieldConfiguration graphene_gradient(const FieldConfiguration& cfg, const GrapheneParams& p) {
    cfg.validate();
    const int Lt = cfg.geometry.dims[0], Lx = cfg.geometry.dims[1];
    const double mass_coeff = p.mass_sign * p.g * p.g / M_PI; // d/dphi of the quadratic term
    const double k = 2.0 * std::sqrt(M_PI);
    FieldConfiguration g = FieldConfiguration::zeros(cfg.geometry);
    for (int t = 0; t < Lt; ++t) {
        for (int x = 0; x < Lx; ++x) {
            const double phi = cfg.at(t, x);
            const double nb = cfg.at(t + 1, x) + cfg.at(t - 1, x)
                            + cfg.at(t, x + 1) + cfg.at(t, x - 1);
            g.at(t, x) = 4.0 * phi - nb + mass_coeff * phi
                       + p.u * k * std::sin(k * phi);
        }
    }
    return g;
}

double LatticeAction::value(const FieldConfiguration& cfg) const {
    if (auto* p = std::get_if<Phi4Params>(&params_)) return phi4_action(cfg, *p);
    return graphene_action(cfg, std::get<GrapheneParams>(params_));
}

FieldConfiguration LatticeAction::gradient(const FieldConfiguration& cfg) const {
    if (auto* p = std::get_if<Phi4Params>(&params_)) return phi4_gradient(cfg, *p);
    return graphene_gradient(cfg, std::get<GrapheneParams>(params_));
}

FieldConfiguration action_gradient(const FieldConfiguration& cfg, const LatticeAction& action) {
    return action.gradient(cfg);
}

Mask checkerboard_mask(const LatticeGeometry& g, int t) {
    g.validate();
    if (t < 0) throw InvalidInputError("mask timestep must be nonnegative");
    Mask m{g, std::vector<uint8_t>(static_cast<size_t>(g.volume()), 0)};
    const uint8_t parity = static_cast<uint8_t>(t % 2);
    for (int i = 0; i < g.dims[0]; ++i)
        for (int j = 0; j < g.dims[1]; ++j)
            m.bits[static_cast<size_t>(g.site(i, j))] =
                ((i + j) % 2 == 0) ? parity : static_cast<uint8_t>(1 - parity);
    return m;
}

std::pair<FieldConfiguration, FieldConfiguration>
split_by_mask(const FieldConfiguration& cfg, const Mask& mask) {
    if (!(cfg.geometry == mask.geometry))
        throw InvalidInputError("split_by_mask: geometry mismatch");
    FieldConfiguration a = cfg, b = cfg;
    for (size_t k = 0; k < cfg.values.size(); ++k) {
        a.values[k] = mask.bits[k] ? cfg.values[k] : 0.0;
        b.values[k] = mask.bits[k] ? 0.0 : cfg.values[k];
    }
    return {a, b};
}

FieldConfiguration translate(const FieldConfiguration& cfg, const std::array<int, 2>& offset) {
    FieldConfiguration out = FieldConfiguration::zeros(cfg.geometry);
    const int L0 = cfg.geometry.dims[0], L1 = cfg.geometry.dims[1];
    for (int i = 0; i < L0; ++i)
        for (int j = 0; j < L1; ++j)
            out.at(i, j) = cfg.at(i - offset[0], j - offset[1]);
    return out;
}

} // namespace lft
