#include "gfspec/pdmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"
#include "gfspec/parallel.hpp"

namespace gfspec {

namespace {

constexpr double kMajorantCap = 1e12;
constexpr std::uint64_t kMaxChildProposals = 1000000;
constexpr std::uint64_t kMaxJumps = 10000000;
constexpr double kMassNodesPerLog = 512.0;

}  // namespace

// ---------------------------------------------------------------------------

RelativeSampler::RelativeSampler(const RelativeMeasure& p)
{
    for (const auto& [u, w] : p.atoms) {
        atom_mass_ += w;
        atom_u_.push_back(u);
        atom_cdf_.push_back(atom_mass_);
    }
    double density_mass = 0.0;
    if (p.power_density) {
        const auto [C, beta] = *p.power_density;
        if (!(beta > -1.0)) {
            throw Error(ErrorKind::DomainError, "p has infinite mass and cannot be sampled");
        }
        power_ = p.power_density;
        density_mass = C / (beta + 1.0);
    } else if (p.density) {
        // Geometric cells near 0, uniform cells above 1e-2.
        for (int i = 0; i <= 200; ++i) grid_.push_back(std::pow(10.0, -12.0 + 10.0 * i / 200.0));
        for (int i = 1; i <= 2000; ++i) grid_.push_back(1e-2 + (1.0 - 1e-2) * i / 2000.0);
        cdf_.assign(grid_.size(), 0.0);
        try {
            cdf_[0] = integrate_singular(p.density, 0.0, grid_[0]);
            for (std::size_t i = 1; i < grid_.size(); ++i) {
                cdf_[i] = cdf_[i - 1] + integrate_singular(p.density, grid_[i - 1], grid_[i]);
            }
        } catch (const Error&) {
            throw Error(ErrorKind::DomainError, "p has infinite mass and cannot be sampled");
        }
        density_mass = cdf_.back();
    }
    mass_ = atom_mass_ + density_mass;
    if (!(mass_ > 0.0) || !std::isfinite(mass_)) {
        throw Error(ErrorKind::DomainError, "p must be a finite non-zero measure to sample");
    }
}

double RelativeSampler::sample(RngStream& rng) const
{
    const double v = rng.uniform() * mass_;
    if (v < atom_mass_) {
        const auto it = std::upper_bound(atom_cdf_.begin(), atom_cdf_.end(), v);
        return atom_u_[std::min<std::size_t>(it - atom_cdf_.begin(), atom_u_.size() - 1)];
    }
    if (power_) {
        const double beta = power_->second;
        return std::pow(rng.uniform(), 1.0 / (beta + 1.0));
    }
    const double target = v - atom_mass_;
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    const std::size_t i = std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1);
    const double lo_u = i == 0 ? 0.0 : grid_[i - 1];
    const double lo_c = i == 0 ? 0.0 : cdf_[i - 1];
    const double w = cdf_[i] - lo_c;
    const double frac = w > 0.0 ? (target - lo_c) / w : 0.5;
    return lo_u + frac * (grid_[i] - lo_u);
}

// ---------------------------------------------------------------------------

TiltedJumpLaw::TiltedJumpLaw(ModelSpec model, WeightFunction h, double b)
    : model_(std::move(model)), h_(std::move(h)), b_(b)
{
    if (!std::isfinite(b_)) throw Error(ErrorKind::DomainError, "b must be finite");
    if (const RelativeMeasure* p = model_.frag.relative_measure()) {
        try {
            sampler_.emplace(*p);
        } catch (const Error&) {
            sampler_.reset();  // sampled through the inverse CDF instead
        }
    }
    std::vector<double> cuts{std::log(model_.domain.lo), std::log(model_.domain.hi)};
    for (double k : h_.kinks) {
        if (k > model_.domain.lo && k < model_.domain.hi) cuts.push_back(std::log(k));
    }
    for (double k : model_.kinks()) {
        if (k > model_.domain.lo && k < model_.domain.hi) cuts.push_back(std::log(k));
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-9; }),
               cuts.end());
    try {
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double lo = cuts[i], hi = cuts[i + 1];
            const auto n = static_cast<std::size_t>(std::max(16.0, std::ceil(kMassNodesPerLog * (hi - lo))));
            const double step = (hi - lo) / static_cast<double>(n);
            std::vector<double> v(n + 1);
            for (std::size_t j = 0; j <= n; ++j) {
                const double z = j == n ? hi : lo + step * static_cast<double>(j);
                v[j] = tilted_mass_quadrature(std::exp(z));
            }
            // One-sided fourth-order end slopes.
            const double d0 = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * step);
            const double d1 = (25 * v[n] - 48 * v[n - 1] + 36 * v[n - 2] - 16 * v[n - 3] + 3 * v[n - 4]) /
                              (12 * step);
            mass_table_.push_back({lo, hi,
                                   boost::math::interpolators::cardinal_cubic_b_spline<double>(
                                       v.begin(), v.end(), lo, step, d0, d1)});
        }
    } catch (const Error&) {
        mass_table_.clear();  // quadrature at every query
    }
}

double TiltedJumpLaw::total_rate(double x) const
{
    const double r = b_ - h_.log_derivative(x) + model_.frag.rate(x);
    if (!std::isfinite(r)) {
        throw Error(ErrorKind::DomainError, "jump rate not finite at x = " + std::to_string(x));
    }
    return r;
}

double TiltedJumpLaw::tilted_mass(double x) const
{
    if (x > 0.0 && !mass_table_.empty()) {
        const double z = std::log(x);
        for (const auto& piece : mass_table_) {
            if (z >= piece.lo && z <= piece.hi) return piece.spline(z);
        }
    }
    return tilted_mass_quadrature(x);
}

double TiltedJumpLaw::tilted_mass_quadrature(double x) const
{
    const double hx = h_.value(x);
    const WeightFunction& h = h_;
    return model_.frag.integrate(x, [&h, hx](double y) { return h.value(y) / hx; }, h_.kinks);
}

double TiltedJumpLaw::sample_child(double x, RngStream& rng, SamplerCounters& counters) const
{
    const double bound = (sampler_ && h_.sup_below) ? h_.sup_below(x) : std::numeric_limits<double>::infinity();
    if (!std::isfinite(bound) || !(bound > 0.0)) return sample_child_inverse(x, rng);
    for (std::uint64_t n = 0; n < kMaxChildProposals; ++n) {
        ++counters.child_proposals;
        const double y = sampler_->sample(rng) * x;
        if (rng.uniform() * bound < h_.value(y)) {
            ++counters.child_accepted;
            return y;
        }
    }
    throw Error(ErrorKind::RejectionStall,
                "child acceptance below 1e-6 over 1e6 proposals at x = " + std::to_string(x));
}

double TiltedJumpLaw::sample_child_inverse(double x, RngStream& rng) const
{
    const KernelMeasure m = model_.frag.measure_at(x);
    const double hx = h_.value(x);
    std::vector<double> cum;
    double total = 0.0;
    for (const auto& [y, w] : m.atoms) {
        total += w * h_.value(y) / hx;
        cum.push_back(total);
    }
    std::vector<double> cuts = m.breaks;
    cuts.insert(cuts.end(), h_.kinks.begin(), h_.kinks.end());
    auto g = [&](double y) { return m.density(y) * h_.value(y) / hx; };
    const double dens = m.density ? integrate_singular_piecewise(g, 0.0, x, cuts) : 0.0;
    total += dens;
    if (!(total > 0.0)) {
        throw Error(ErrorKind::DomainError, "tilted kernel has no mass at x = " + std::to_string(x));
    }
    const double v = rng.uniform() * total;
    for (std::size_t i = 0; i < cum.size(); ++i) {
        if (v < cum[i]) return m.atoms[i].first;
    }
    const double target = v - (cum.empty() ? 0.0 : cum.back());
    double lo = 0.0;
    double hi = x;
    for (int it = 0; it < 60 && hi - lo > 1e-13 * x; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (integrate_singular_piecewise(g, 0.0, mid, cuts) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::optional<double> TiltedJumpLaw::post_jump(double x, RngStream& rng,
                                               SamplerCounters& counters) const
{
    const double r = total_rate(x);
    const double bound = (sampler_ && h_.sup_below) ? h_.sup_below(x) : std::numeric_limits<double>::infinity();
    if (std::isfinite(bound) && bound > 0.0) {
        // k_h <= M := K p((0,1)) sup_{y<x} h(y) / h(x); when M <= r one proposal decides
        // between a child and the cemetery with the exact probabilities.
        const double M = model_.frag.rate(x) * sampler_->mass() * bound / h_.value(x);
        if (M <= r) {
            if (rng.uniform() * r >= M) return std::nullopt;
            ++counters.child_proposals;
            const double y = sampler_->sample(rng) * x;
            if (rng.uniform() * bound < h_.value(y)) {
                ++counters.child_accepted;
                return y;
            }
            return std::nullopt;
        }
    }
    const double kh = tilted_mass(x);
    const double q = r - kh;
    if (q < -1e-9 * (1.0 + std::abs(r))) {
        throw Error(ErrorKind::BoundViolated,
                    "killing rate q = " + std::to_string(q) + " < 0 at x = " + std::to_string(x) +
                        "; b is not an upper bound of Ah/h");
    }
    if (rng.uniform() * r >= kh) return std::nullopt;
    return sample_child(x, rng, counters);
}

// ---------------------------------------------------------------------------

std::optional<double> next_jump_time(PdmpState& state, const TiltedJumpLaw& law, double horizon)
{
    if (state.dead) throw Error(ErrorKind::DomainError, "next_jump_time from the cemetery");
    if (!(horizon > 0.0)) return std::nullopt;
    const FlowEngine& flow = *law.model().flow;
    const auto kinks = law.model().kinks();
    const double delta = horizon / 16.0;
    const double s0 = flow.s_of(state.x);
    double elapsed = 0.0;
    while (elapsed < horizon) {
        const double w = std::min(delta, horizon - elapsed);
        const double xa = flow.s_inverse(s0 + elapsed);
        const double xb = flow.s_inverse(s0 + elapsed + w);
        double rbar = 0.0;
        for (int k = 0; k <= 8; ++k) {
            rbar = std::max(rbar, law.total_rate(flow.s_inverse(s0 + elapsed + w * k / 8.0)));
        }
        for (double kink : kinks) {
            if (kink > xa && kink < xb) {
                rbar = std::max({rbar, law.total_rate(kink), law.total_rate(kink * (1.0 - 1e-12))});
            }
        }
        rbar *= 1.1;
        if (rbar > kMajorantCap) {
            throw Error(ErrorKind::MajorantOverflow,
                        "jump-rate majorant " + std::to_string(rbar) + " above 1e12 near x = " +
                            std::to_string(xa));
        }
        if (rbar > 0.0) {
            double tau = 0.0;
            while (true) {
                tau += state.rng.exponential(rbar);
                if (tau > w) break;
                ++state.counters.proposals;
                const double r = law.total_rate(flow.s_inverse(s0 + elapsed + tau));
                if (r > rbar) ++state.counters.majorant_misses;
                if (state.rng.uniform() * rbar < r) {
                    ++state.counters.accepted;
                    return elapsed + tau;
                }
            }
        }
        elapsed += w;
    }
    return std::nullopt;
}

void post_jump_sample(PdmpState& state, const TiltedJumpLaw& law)
{
    if (state.dead) return;
    const auto y = law.post_jump(state.x, state.rng, state.counters);
    if (y) {
        state.x = *y;
    } else {
        state.dead = true;
    }
}

namespace {

template <class Record>
void run_path(PdmpState& st, const TiltedJumpLaw& law, double t_end, Record&& record)
{
    const FlowEngine& flow = *law.model().flow;
    const double guard = law.model().domain.hi * 1e3;
    std::uint64_t jumps = 0;
    while (st.t < t_end) {
        const auto tau = next_jump_time(st, law, t_end - st.t);
        if (!tau) {
            st.x = flow.flow_at(st.x, t_end - st.t);
            st.t = t_end;
            break;
        }
        st.x = flow.flow_at(st.x, *tau);
        st.t += *tau;
        if (st.x > guard) {
            throw Error(ErrorKind::ExplosionGuard,
                        "position " + std::to_string(st.x) + " beyond x_max * 1e3");
        }
        post_jump_sample(st, law);
        if (++jumps > kMaxJumps) {
            throw Error(ErrorKind::ExplosionGuard, "more than 1e7 jumps before t_end");
        }
        if (st.dead) {
            record(st.t, std::numeric_limits<double>::quiet_NaN(), PathEvent::Kill);
            return;
        }
        record(st.t, st.x, PathEvent::Jump);
    }
    if (st.x > guard) {
        throw Error(ErrorKind::ExplosionGuard, "position " + std::to_string(st.x) + " beyond x_max * 1e3");
    }
    record(st.t, st.x, PathEvent::End);
}

}  // namespace

std::vector<PathPoint> simulate_path(const TiltedJumpLaw& law, double x0, double t_end,
                                     std::uint64_t seed, std::uint64_t stream)
{
    if (!(x0 > 0.0)) throw Error(ErrorKind::DomainError, "x0 must be positive");
    PdmpState st(x0, seed, stream);
    std::vector<PathPoint> trace{{0.0, x0, PathEvent::Start}};
    run_path(st, law, t_end, [&](double t, double x, PathEvent e) { trace.push_back({t, x, e}); });
    return trace;
}

std::optional<double> simulate_endpoint(const TiltedJumpLaw& law, double x0, double t_end,
                                        RngStream& rng, SamplerCounters* counters)
{
    PdmpState st;
    st.x = x0;
    st.rng = rng;
    run_path(st, law, t_end, [](double, double, PathEvent) {});
    rng = st.rng;
    if (counters) {
        counters->proposals += st.counters.proposals;
        counters->accepted += st.counters.accepted;
        counters->majorant_misses += st.counters.majorant_misses;
        counters->child_proposals += st.counters.child_proposals;
        counters->child_accepted += st.counters.child_accepted;
    }
    if (st.dead) return std::nullopt;
    return st.x;
}

std::vector<double> simulate_endpoints(const TiltedJumpLaw& law, double x0, double t,
                                       std::size_t n_paths, std::uint64_t seed, unsigned threads)
{
    std::vector<double> out(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t i) {
        RngStream rng(seed, i);
        const auto y = simulate_endpoint(law, x0, t, rng);
        out[i] = y ? *y : std::numeric_limits<double>::quiet_NaN();
    });
    return out;
}

McResult mc_semigroup(const TiltedJumpLaw& law, const ScalarFn& f, double x0, double t,
                      std::size_t n_paths, std::uint64_t seed, unsigned threads)
{
    if (n_paths < 2) throw Error(ErrorKind::DomainError, "mc_semigroup needs at least 2 paths");
    const auto ends = simulate_endpoints(law, x0, t, n_paths, seed, threads);
    std::vector<double> g(n_paths, 0.0);
    std::size_t alive = 0;
    for (std::size_t i = 0; i < n_paths; ++i) {
        if (std::isnan(ends[i])) continue;
        ++alive;
        g[i] = f(ends[i]) / law.h()(ends[i]);
    }
    const double n = static_cast<double>(n_paths);
    double sum = 0.0;
    for (double v : g) sum += v;
    // Jackknife over leave-one-out means.
    double jbar = 0.0;
    std::vector<double> loo(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) {
        loo[i] = (sum - g[i]) / (n - 1.0);
        jbar += loo[i] / n;
    }
    double ss = 0.0;
    for (double v : loo) ss += (v - jbar) * (v - jbar);
    const double scale = std::exp(law.b() * t) * law.h()(x0);
    McResult r;
    r.estimate = scale * sum / n;
    r.std_error = scale * std::sqrt((n - 1.0) / n * ss);
    r.n_paths = n_paths;
    r.seed = seed;
    r.alive_fraction = static_cast<double>(alive) / n;
    r.variance_blowup = r.std_error > std::abs(r.estimate);
    return r;
}

}  // namespace gfspec
