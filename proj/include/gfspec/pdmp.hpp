#pragma once

#include <cstdint>
#include <optional>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <vector>

#include "gfspec/model.hpp"
#include "gfspec/rng.hpp"

namespace gfspec {

struct SamplerCounters {
    std::uint64_t proposals = 0;        // thinning proposals
    std::uint64_t accepted = 0;         // accepted jump times
    std::uint64_t majorant_misses = 0;  // r exceeded the windowed majorant
    std::uint64_t child_proposals = 0;
    std::uint64_t child_accepted = 0;
};

/// Position x (or the cemetery once killed), clock and private random stream.
struct PdmpState {
    double x = 1.0;
    double t = 0.0;
    bool dead = false;
    RngStream rng;
    SamplerCounters counters;

    PdmpState() = default;
    PdmpState(double x0, std::uint64_t seed, std::uint64_t stream) : x(x0), rng(seed, stream) {}
};

/// Normalized law of p on (0,1): atoms and a density, sampled exactly for power
/// densities and through a tabulated inverse CDF otherwise.
class RelativeSampler {
public:
    explicit RelativeSampler(const RelativeMeasure& p);
    double mass() const { return mass_; }
    double sample(RngStream& rng) const;

private:
    std::vector<double> atom_u_;
    std::vector<double> atom_cdf_;
    double atom_mass_ = 0.0;
    double mass_ = 0.0;
    std::optional<std::pair<double, double>> power_;
    std::vector<double> grid_;
    std::vector<double> cdf_;
};

/// Jumps of the h-transformed process: tilted kernel k_h(x,dy) = h(y)/h(x) k(x,dy),
/// killing rate q = b - Ah/h and total rate r = k_h(x,(0,x)) + q = b - d_s h/h + K.
class TiltedJumpLaw {
public:
    TiltedJumpLaw(ModelSpec model, WeightFunction h, double b);

    const ModelSpec& model() const { return model_; }
    const WeightFunction& h() const { return h_; }
    double b() const { return b_; }

    double total_rate(double x) const;
    /// k_h(x, (0,x)); tabulated on the model domain, quadrature outside it.
    double tilted_mass(double x) const;
    double tilted_mass_quadrature(double x) const;
    double killing_rate(double x) const { return total_rate(x) - tilted_mass(x); }

    /// Child position drawn from k_h(x, .) / k_h(x, (0,x)).
    double sample_child(double x, RngStream& rng, SamplerCounters& counters) const;
    /// Post-jump position; nullopt is the cemetery.
    std::optional<double> post_jump(double x, RngStream& rng, SamplerCounters& counters) const;

private:
    double sample_child_inverse(double x, RngStream& rng) const;

    ModelSpec model_;
    WeightFunction h_;
    double b_;
    std::optional<RelativeSampler> sampler_;
    struct MassPiece {
        double lo, hi;  // log x
        boost::math::interpolators::cardinal_cubic_b_spline<double> spline;
    };
    std::vector<MassPiece> mass_table_;
};

/// Time to the next jump from the current state, or nullopt past the horizon.
std::optional<double> next_jump_time(PdmpState& state, const TiltedJumpLaw& law, double horizon);

/// Applies an accepted jump at state.x: cemetery with probability q/r, else a child.
void post_jump_sample(PdmpState& state, const TiltedJumpLaw& law);

enum class PathEvent { Start, Jump, Kill, End };

struct PathPoint {
    double t;
    double x;  // position after the event; NaN once killed
    PathEvent event;
};

std::vector<PathPoint> simulate_path(const TiltedJumpLaw& law, double x0, double t_end,
                                     std::uint64_t seed, std::uint64_t stream);

/// Position at t_end (nullopt if killed) without storing the trace.
std::optional<double> simulate_endpoint(const TiltedJumpLaw& law, double x0, double t_end,
                                        RngStream& rng, SamplerCounters* counters = nullptr);

struct McResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    double alive_fraction = 0.0;
    bool variance_blowup = false;
};

/// T_t f(x0) = e^{bt} h(x0) E[f(X_t)/h(X_t); t < zeta] with a jackknife standard error.
McResult mc_semigroup(const TiltedJumpLaw& law, const ScalarFn& f, double x0, double t,
                      std::size_t n_paths, std::uint64_t seed, unsigned threads = 1);

/// Endpoints of n independent paths (NaN when killed), path i on stream i.
std::vector<double> simulate_endpoints(const TiltedJumpLaw& law, double x0, double t,
                                       std::size_t n_paths, std::uint64_t seed,
                                       unsigned threads = 1);

}  // namespace gfspec
