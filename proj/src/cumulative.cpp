#include "gfspec/cumulative.hpp"

#include <algorithm>
#include <cmath>

#include "gfspec/errors.hpp"
#include "gfspec/quadrature.hpp"

namespace gfspec {

namespace {

// Tail sum over three successive blocks of 8 decades each; declared convergent when
// the last block is negligible, with a geometric estimate of what is left.
double integrate_log(const std::function<double(double)>& g, double za, double zb,
                     std::span<const double> breaks, const QuadratureOptions& qo)
{
    auto f = [&g](double z) { return std::exp(z) * g(std::exp(z)); };
    try {
        return integrate_piecewise(f, za, zb, breaks, qo);
    } catch (const Error&) {
        if (za > zb) return -integrate_singular_piecewise(f, zb, za, breaks, qo);
        return integrate_singular_piecewise(f, za, zb, breaks, qo);
    }
}

// \int_0^{sqrt(len)} g(end + dir w^2) 2w dw: removes inverse-square-root singularities at `end`.
double integrate_from_singular_end(const std::function<double(double)>& g, double end, double dir,
                                   double len, const QuadratureOptions& qo)
{
    auto f = [&](double w) { return 2.0 * w * g(end + dir * w * w); };
    const double W = std::sqrt(len);
    try {
        return integrate(f, 0.0, W, qo);
    } catch (const Error&) {
        return integrate_singular(f, 0.0, W, qo);
    }
}

// \int_a^b g for a < b with no interior kink.
double piece(const std::function<double(double)>& g, double a, double b,
             const QuadratureOptions& qo)
{
    if (a == b) return 0.0;
    const bool sa = !std::isfinite(g(a));
    const bool sb = !std::isfinite(g(b));
    if (!sa && !sb) return integrate_log(g, std::log(a), std::log(b), {}, qo);
    if (sa && sb) {
        const double m = 0.5 * (a + b);
        return integrate_from_singular_end(g, a, 1.0, m - a, qo) +
               integrate_from_singular_end(g, b, -1.0, b - m, qo);
    }
    if (sa) return integrate_from_singular_end(g, a, 1.0, b - a, qo);
    return integrate_from_singular_end(g, b, -1.0, b - a, qo);
}

std::optional<double> tail_limit(const std::function<double(double)>& block)
{
    double parts[3];
    try {
        for (int k = 0; k < 3; ++k) parts[k] = block(k);
    } catch (const Error&) {
        return std::nullopt;
    }
    const double sum = parts[0] + parts[1] + parts[2];
    if (!std::isfinite(sum)) return std::nullopt;
    if (std::abs(parts[2]) > 1e-6 * std::max(std::abs(sum), 1e-300)) return std::nullopt;
    const double r = parts[1] != 0.0 ? parts[2] / parts[1] : 0.0;
    const double rest = (r > 0.0 && r < 1.0) ? parts[2] * r / (1.0 - r) : 0.0;
    return sum + rest;
}

}  // namespace

CumulativeTable::CumulativeTable(std::function<double(double)> integrand,
                                 std::vector<double> kinks, Options opt)
    : g_(std::move(integrand)), kinks_(std::move(kinks)), opt_(opt)
{
    if (!(opt_.lo > 0.0 && opt_.lo < 1.0 && opt_.hi > 1.0)) {
        throw Error(ErrorKind::DomainError, "cumulative table must bracket x = 1");
    }
    std::sort(kinks_.begin(), kinks_.end());
    const double zlo = std::log(opt_.lo);
    const double zhi = std::log(opt_.hi);
    const auto steps = static_cast<std::size_t>(std::ceil((zhi - zlo) / opt_.log_step));
    std::vector<double> zs;
    zs.reserve(steps + kinks_.size() + 2);
    for (std::size_t i = 0; i <= steps; ++i) {
        zs.push_back(zlo + (zhi - zlo) * static_cast<double>(i) / static_cast<double>(steps));
    }
    zs.push_back(0.0);
    for (double k : kinks_) {
        if (k > opt_.lo && k < opt_.hi) zs.push_back(std::log(k));
    }
    std::sort(zs.begin(), zs.end());
    zs.erase(std::unique(zs.begin(), zs.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             zs.end());
    // Snap the anchor exactly so that G(1) = 0 is exact.
    for (double& z : zs) {
        if (std::abs(z) < 1e-12) z = 0.0;
    }

    logs_ = zs;
    nodes_.resize(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) nodes_[i] = zs[i] == 0.0 ? 1.0 : std::exp(zs[i]);

    const std::size_t n = nodes_.size();
    std::vector<double> increments(n - 1);
    QuadratureOptions qo;
    qo.rel_tol = opt_.rel_tol;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        increments[i] = piece(g_, nodes_[i], nodes_[i + 1], qo);
    }
    const auto anchor = static_cast<std::size_t>(
        std::find(logs_.begin(), logs_.end(), 0.0) - logs_.begin());
    values_.assign(n, 0.0);
    for (std::size_t i = anchor + 1; i < n; ++i) values_[i] = values_[i - 1] + increments[i - 1];
    for (std::size_t i = anchor; i-- > 0;) values_[i] = values_[i + 1] - increments[i];

    dleft_.resize(n - 1);
    dright_.resize(n - 1);
    exact_.assign(n - 1, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        dleft_[i] = nodes_[i] * g_(nodes_[i]);
        const double inside = nodes_[i + 1] * (1.0 - 1e-13);
        const double gb = g_(nodes_[i + 1]);
        dright_[i] = std::isfinite(gb) ? nodes_[i + 1] * g_(inside) : gb;
        if (!std::isfinite(dleft_[i]) || !std::isfinite(dright_[i])) {
            exact_[i] = 1;
            continue;
        }
        // Midpoint self-check: fall back to quadrature where the cubic is not accurate.
        const double zm = 0.5 * (logs_[i] + logs_[i + 1]);
        const double ref = values_[i] + piece(g_, nodes_[i], std::exp(zm), qo);
        if (std::abs(hermite(i, zm) - ref) > 1e-12 * std::max(1.0, std::abs(ref))) exact_[i] = 1;
    }

    const double lo = nodes_.front();
    limit_at_zero_ = tail_limit([this, lo](int k) {
        const double b = lo * std::pow(1e-8, k);
        const double a = b * 1e-8;
        return integrate_piecewise([this](double z) { return std::exp(z) * g_(std::exp(z)); },
                                   std::log(a), std::log(b), {}, {});
    });
    if (limit_at_zero_) *limit_at_zero_ = values_.front() - *limit_at_zero_;

    const double hi = nodes_.back();
    limit_at_infinity_ = tail_limit([this, hi](int k) {
        const double a = hi * std::pow(1e8, k);
        const double b = a * 1e8;
        return integrate_piecewise([this](double z) { return std::exp(z) * g_(std::exp(z)); },
                                   std::log(a), std::log(b), {}, {});
    });
    if (limit_at_infinity_) *limit_at_infinity_ += values_.back();
}

double CumulativeTable::direct(double a, double b) const
{
    std::vector<double> cuts{a};
    for (double k : kinks_) {
        if (k > a && k < b) cuts.push_back(k);
    }
    cuts.push_back(b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += piece(g_, cuts[i], cuts[i + 1], {opt_.rel_tol, 15});
    }
    return total;
}

double CumulativeTable::hermite(std::size_t i, double z) const
{
    const double h = logs_[i + 1] - logs_[i];
    const double t = (z - logs_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * values_[i] + h10 * h * dleft_[i] + h01 * values_[i + 1] + h11 * h * dright_[i];
}

double CumulativeTable::operator()(double x) const
{
    if (!(x > 0.0)) throw Error(ErrorKind::DomainError, "cumulative table queried at x <= 0");
    if (x == 1.0) return 0.0;
    if (x >= nodes_.front() && x <= nodes_.back()) {
        const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
        i = i == 0 ? 0 : std::min(i - 1, nodes_.size() - 2);
        if (x == nodes_[i]) return values_[i];
        if (exact_[i]) {
            if (!std::isfinite(dright_[i])) return values_[i + 1] - direct(x, nodes_[i + 1]);
            return values_[i] + direct(nodes_[i], x);
        }
        return hermite(i, std::log(x));
    }
    if (x > nodes_.back()) {
        if (x > opt_.hard_max) {
            throw Error(ErrorKind::RangeExtensionFailure,
                        "query x = " + std::to_string(x) + " beyond hard limit");
        }
        return values_.back() + direct(nodes_.back(), x);
    }
    // Below the table G lies between G(0+) and G(lo); when that gap is negligible, G(0+) is
    // returned instead of a fresh quadrature.
    if (limit_at_zero_ &&
        values_.front() - *limit_at_zero_ <= 1e-12 * std::max(1.0, std::abs(*limit_at_zero_))) {
        return *limit_at_zero_;
    }
    return values_.front() - direct(x, nodes_.front());
}

double CumulativeTable::inverse(double v, double tol) const
{
    if (v >= values_.front() && v <= values_.back()) {
        const auto it = std::upper_bound(values_.begin(), values_.end(), v);
        std::size_t i = static_cast<std::size_t>(it - values_.begin());
        i = i == 0 ? 0 : std::min(i - 1, values_.size() - 2);
        if (v == values_[i]) return nodes_[i];
        if (exact_[i]) return bisect(logs_[i], logs_[i + 1], v, tol);
        double a = logs_[i];
        double b = logs_[i + 1];
        const double span = values_[i + 1] - values_[i];
        double z = a + (b - a) * (v - values_[i]) / span;
        for (int iter = 0; iter < 100; ++iter) {
            const double f = hermite(i, z) - v;
            if (std::abs(f) <= tol) break;
            if (f > 0) b = z; else a = z;
            // Newton step on the cubic, derivative from the Hermite basis.
            const double h = logs_[i + 1] - logs_[i];
            const double t = (z - logs_[i]) / h;
            const double d = (6 * t * t - 6 * t) / h * values_[i] +
                             (3 * t * t - 4 * t + 1) * dleft_[i] +
                             (-6 * t * t + 6 * t) / h * values_[i + 1] +
                             (3 * t * t - 2 * t) * dright_[i];
            double next = d > 0 ? z - f / d : 0.5 * (a + b);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            if (b - a < 1e-15) break;
            z = next;
        }
        return std::exp(z);
    }
    // Outside the table: bracket in ln x, then bisection on direct quadrature.
    double za;
    double zb;
    if (v > values_.back()) {
        za = logs_.back();
        zb = za;
        double gz = values_.back();
        while (gz < v) {
            za = zb;
            zb += 1.0;
            if (zb > std::log(opt_.hard_max)) {
                throw Error(ErrorKind::RangeExtensionFailure,
                            "inverse of " + std::to_string(v) + " beyond hard limit");
            }
            gz = (*this)(std::exp(zb));
        }
    } else {
        if (limit_at_zero_ && v <= *limit_at_zero_) {
            throw Error(ErrorKind::DomainError, "value below G(0+)");
        }
        zb = logs_.front();
        za = zb;
        double gz = values_.front();
        while (gz > v) {
            zb = za;
            za -= 1.0;
            if (za < -700.0) throw Error(ErrorKind::DomainError, "inverse underflow");
            gz = (*this)(std::exp(za));
        }
    }
    return bisect(za, zb, v, tol);
}

double CumulativeTable::bisect(double za, double zb, double v, double tol) const
{
    for (int iter = 0; iter < 200; ++iter) {
        const double zm = 0.5 * (za + zb);
        const double gm = (*this)(std::exp(zm));
        if (std::abs(gm - v) <= tol || zb - za < 1e-15) return std::exp(zm);
        if (gm < v) za = zm; else zb = zm;
    }
    return std::exp(0.5 * (za + zb));
}

}  // namespace gfspec
