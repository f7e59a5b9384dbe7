#include "gfspec/qsd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"
#include "gfspec/parallel.hpp"

namespace gfspec {

namespace {

// Two-sided 95% Student t quantile with 19 degrees of freedom.
constexpr double kT19 = 2.093;

double t_quantile(std::size_t dof)
{
    if (dof == 19) return kT19;
    // Cornish-Fisher expansion around the normal quantile.
    const double z = 1.959963984540054;
    const double n = static_cast<double>(dof);
    return z + (z * z * z + z) / (4.0 * n) + (5 * std::pow(z, 5) + 16 * z * z * z + 3 * z) / (96.0 * n * n);
}

}  // namespace

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return 0.5 * (a / a.sum() - b / b.sum()).cwiseAbs().sum();
}

namespace {

/// Fleming-Viot system of n particles started at x0 on streams base..base+n (the last one
/// picks respawn sources). on_kill(t) fires at each kill; on_snapshot(k, particles, t)
/// fires for every snapshot time before the system passes it; on_segment(x, t0, t1) fires
/// for every stretch of deterministic motion started at x.
template <class OnKill, class OnSnapshot, class OnSegment>
void fleming_viot(const TiltedJumpLaw& law, std::size_t n, double x0, double t_end,
                  std::uint64_t seed, std::uint64_t base, double window,
                  const std::vector<double>& snapshot_times, OnKill&& on_kill,
                  OnSnapshot&& on_snapshot, OnSegment&& on_segment, SamplerCounters* counters)
{
    const FlowEngine& flow = *law.model().flow;
    std::vector<PdmpState> ps;
    ps.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ps.emplace_back(x0, seed, base + i);
    RngStream chooser(seed, base + n);

    struct Event {
        double t;
        std::size_t i;
        bool jump;
        bool operator>(const Event& o) const { return t > o.t || (t == o.t && i > o.i); }
    };
    std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue;
    auto schedule = [&](std::size_t i) {
        PdmpState& s = ps[i];
        const double H = std::min(window, t_end - s.t);
        if (!(H > 0.0)) return;
        const auto tau = next_jump_time(s, law, H);
        queue.push({tau ? s.t + *tau : s.t + H, i, tau.has_value()});
    };
    for (std::size_t i = 0; i < n; ++i) schedule(i);

    std::size_t snap = 0;
    auto take_snapshots = [&](double upto) {
        while (snap < snapshot_times.size() && snapshot_times[snap] <= upto) {
            on_snapshot(snap, ps, snapshot_times[snap]);
            ++snap;
        }
    };
    while (!queue.empty()) {
        const Event ev = queue.top();
        queue.pop();
        take_snapshots(ev.t);
        PdmpState& s = ps[ev.i];
        on_segment(s.x, s.t, ev.t);
        s.x = flow.flow_at(s.x, ev.t - s.t);
        s.t = ev.t;
        if (ev.jump) {
            post_jump_sample(s, law);
            if (s.dead) {
                on_kill(ev.t);
                auto j = static_cast<std::size_t>(chooser.uniform() * static_cast<double>(n - 1));
                if (j >= ev.i) ++j;
                s.x = flow.flow_at(ps[j].x, ev.t - ps[j].t);
                s.dead = false;
            }
        }
        schedule(ev.i);
    }
    take_snapshots(t_end);
    if (counters) {
        for (const auto& p : ps) {
            counters->proposals += p.counters.proposals;
            counters->accepted += p.counters.accepted;
            counters->majorant_misses += p.counters.majorant_misses;
            counters->child_proposals += p.counters.child_proposals;
            counters->child_accepted += p.counters.child_accepted;
        }
    }
}

}  // namespace

FvResult fv_run(const TiltedJumpLaw& law, const SizeGrid& grid, double x0, const FvOptions& opt)
{
    if (opt.particles < 100) throw Error(ErrorKind::DomainError, "Fleming-Viot needs at least 100 particles");
    if (!(opt.t_end > 0.0) || !(opt.burn_in >= 0.0 && opt.burn_in < 1.0) || opt.batches < 2 ||
        opt.snapshots < 2) {
        throw Error(ErrorKind::DomainError, "invalid Fleming-Viot options");
    }
    const FlowEngine& flow = *law.model().flow;
    const std::size_t N = opt.particles;
    FvResult res;
    res.particles = N;
    res.burn_in_time = opt.burn_in * opt.t_end;
    res.supported = law.model().declared.doeblin.has_value() || law.model().declared.doeblin_map.has_value();
    const double window = opt.t_end - res.burn_in_time;
    const double batch_len = window / static_cast<double>(opt.batches);
    std::vector<std::uint64_t> batch_kills(opt.batches, 0);

    std::vector<double> snaps;
    for (std::size_t k = 0; k < opt.snapshots; ++k) {
        snaps.push_back(res.burn_in_time +
                        window * (static_cast<double>(k) + 0.5) / static_cast<double>(opt.snapshots));
    }
    Eigen::VectorXd first = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    Eigen::VectorXd second = first;

    fleming_viot(
        law, N, x0, opt.t_end, opt.seed, 0, opt.event_window, snaps,
        [&](double t) {
            ++res.kills;
            if (t < res.burn_in_time) return;
            ++res.kills_post_burn_in;
            const auto b = std::min(opt.batches - 1,
                                    static_cast<std::size_t>((t - res.burn_in_time) / batch_len));
            ++batch_kills[b];
        },
        [&](std::size_t k, const std::vector<PdmpState>& ps, double ts) {
            Eigen::VectorXd& acc = k < opt.snapshots / 2 ? first : second;
            for (const auto& p : ps) {
                acc(static_cast<Eigen::Index>(grid.locate(flow.flow_at(p.x, ts - p.t)))) += 1.0;
            }
        },
        [](double, double, double) {}, &res.counters);

    res.nu = first + second;
    res.nu /= res.nu.sum();
    res.split_half_tv = total_variation(first, second);

    const double denom = static_cast<double>(N) * batch_len;
    double mean = 0.0;
    for (auto k : batch_kills) {
        res.batch_rates.push_back(static_cast<double>(k) / denom);
        mean += res.batch_rates.back();
    }
    mean /= static_cast<double>(opt.batches);
    double var = 0.0;
    for (double r : res.batch_rates) var += (r - mean) * (r - mean);
    var /= static_cast<double>(opt.batches - 1);
    res.lambda0X = static_cast<double>(res.kills_post_burn_in) / (static_cast<double>(N) * window);
    res.ci = t_quantile(opt.batches - 1) * std::sqrt(var / static_cast<double>(opt.batches));
    res.stall = res.kills_post_burn_in == 0;
    return res;
}

Reconstruction reconstruct_m_phi(const SizeGrid& grid, const Eigen::VectorXd& nu,
                                 const Eigen::VectorXd& eta, const WeightFunction& h,
                                 const WeightFunction& psi)
{
    const auto n = static_cast<Eigen::Index>(grid.size());
    if (nu.size() != n || (eta.size() != 0 && eta.size() != n)) {
        throw Error(ErrorKind::DomainError, "vector length does not match the grid");
    }
    Reconstruction r;
    r.m.resize(n);
    r.phi.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double hx = h(grid.centers[static_cast<std::size_t>(i)]);
        r.m(i) = nu(i) / hx;
        r.phi(i) = (eta.size() ? eta(i) : 1.0) * hx;
    }
    r.normalization = normalize_pair(grid, psi, r.m, r.phi);
    return r;
}

EtaResult eta_estimate(const TiltedJumpLaw& law, const std::vector<double>& xs, double lambda0X,
                       double t_probe, const EtaOptions& opt)
{
    if (!(t_probe > 0.0) || opt.particles < 2) throw Error(ErrorKind::DomainError, "invalid eta options");
    const std::size_t n = xs.size();
    EtaResult r;
    r.x = xs;
    r.eta.assign(n, 0.0);
    r.eta_long.assign(n, 0.0);
    r.drift.assign(n, 0.0);
    r.resolved.assign(n, 0);
    std::vector<std::uint64_t> kills(n, 0), kills_long(n, 0);
    parallel_for(n, opt.threads, [&](std::size_t k) {
        fleming_viot(
            law, opt.particles, xs[k], 1.5 * t_probe, opt.seed, k * (opt.particles + 1), 1.0, {},
            [&](double t) {
                ++kills_long[k];
                if (t <= t_probe) ++kills[k];
            },
            [](std::size_t, const std::vector<PdmpState>&, double) {}, [](double, double, double) {},
            nullptr);
    });
    // Each kill removes 1/n of the mass of the unresampled system: P_x(t < zeta) is the
    // expectation of (1 - 1/n)^{kills by t}.
    const double step = std::log1p(-1.0 / static_cast<double>(opt.particles));
    double top = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        r.eta[k] = std::exp(lambda0X * t_probe + static_cast<double>(kills[k]) * step);
        r.eta_long[k] = std::exp(1.5 * lambda0X * t_probe + static_cast<double>(kills_long[k]) * step);
        r.drift[k] = std::abs(r.eta_long[k] / r.eta[k] - 1.0);
        top = std::max(top, r.eta[k]);
    }
    for (std::size_t k = 0; k < n; ++k) {
        r.resolved[k] = r.eta[k] >= 1e-3 * top;
        if (r.resolved[k]) r.max_drift = std::max(r.max_drift, r.drift[k]);
    }
    if (r.max_drift > opt.max_drift) {
        throw Error(ErrorKind::InconsistentEta,
                    "eta drifts by " + std::to_string(r.max_drift) + " between t and 1.5 t");
    }
    return r;
}

}  // namespace gfspec
