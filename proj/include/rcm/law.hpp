// Single-edge conductance laws on [0,1].
//
// Every law draws from at most two uniforms produced by the counter RNG, so
// a field is a pure function of (seed, edge index). The mixture law is
// parameterized directly by the masses it is used to control:
//   P(omega >= alpha) = p_strong, P(0 < omega < alpha) = p_weak,
//   P(omega = 0) = 1 - p_strong - p_weak,
// with the value uniform inside each band.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "rcm/rng.hpp"

namespace rcm {

struct ConductanceLaw {
    enum class Kind { constant, bernoulli, uniform_open, heavy_tail, mixture };

    Kind kind = Kind::constant;
    double a = 1.0;     // constant value | bernoulli p | heavy-tail gamma | mixture p_strong
    double b = 0.0;     // mixture p_weak
    double alpha = 0.5; // mixture band split

    static ConductanceLaw constant(double c) { return validated({Kind::constant, c, 0, 0}); }
    static ConductanceLaw bernoulli(double p) { return validated({Kind::bernoulli, p, 0, 0}); }
    static ConductanceLaw uniform_open() { return validated({Kind::uniform_open, 0, 0, 0}); }
    static ConductanceLaw heavy_tail(double gamma) {
        return validated({Kind::heavy_tail, gamma, 0, 0});
    }
    static ConductanceLaw mixture(double p_strong, double p_weak, double alpha) {
        return validated({Kind::mixture, p_strong, p_weak, alpha});
    }

    static ConductanceLaw validated(ConductanceLaw law) {
        law.validate();
        return law;
    }

    void validate() const {
        switch (kind) {
        case Kind::constant:
            if (!(a >= 0.0 && a <= 1.0))
                throw std::invalid_argument("constant law: value must lie in [0,1], got " +
                                            std::to_string(a));
            break;
        case Kind::bernoulli:
            if (!(a >= 0.0 && a <= 1.0))
                throw std::invalid_argument("bernoulli law: p must lie in [0,1], got " +
                                            std::to_string(a));
            break;
        case Kind::uniform_open:
            break;
        case Kind::heavy_tail:
            if (!(a > 0.0))
                throw std::invalid_argument("heavy_tail law: gamma must be > 0, got " +
                                            std::to_string(a));
            break;
        case Kind::mixture:
            if (!(a >= 0.0 && b >= 0.0 && a + b <= 1.0))
                throw std::invalid_argument(
                    "mixture law: need p_strong, p_weak >= 0 and p_strong + p_weak <= 1, got " +
                    std::to_string(a) + ", " + std::to_string(b));
            if (!(alpha > 0.0 && alpha < 1.0))
                throw std::invalid_argument("mixture law: alpha must lie in (0,1), got " +
                                            std::to_string(alpha));
            break;
        }
    }

    double sample(std::uint64_t seed, std::int64_t edge) const {
        const std::uint64_t e = static_cast<std::uint64_t>(edge);
        switch (kind) {
        case Kind::constant:
            return a;
        case Kind::bernoulli:
            return to_unit_half_open(counter_word(seed, e, 0)) < a ? 1.0 : 0.0;
        case Kind::uniform_open:
            return to_unit_left_open(counter_word(seed, e, 0));
        case Kind::heavy_tail:
            // P(omega <= t) = t^gamma on [0,1]: invert with a (0,1] uniform.
            return std::pow(to_unit_left_open(counter_word(seed, e, 0)), 1.0 / a);
        case Kind::mixture: {
            double band = to_unit_half_open(counter_word(seed, e, 0));
            double u = to_unit_open(counter_word(seed, e, 1));
            if (band < a) return alpha + (1.0 - alpha) * u;
            if (band < a + b) return alpha * u;
            return 0.0;
        }
        }
        return 0.0;
    }

    // Right-continuous CDF P(omega <= t), used by the goodness-of-fit checks.
    double cdf(double t) const {
        if (t < 0.0) return 0.0;
        if (t >= 1.0) return 1.0;
        switch (kind) {
        case Kind::constant:
            return t >= a ? 1.0 : 0.0;
        case Kind::bernoulli:
            return 1.0 - a; // t in [0,1): only the atom at 0 is below
        case Kind::uniform_open:
            return t;
        case Kind::heavy_tail:
            return std::pow(t, a);
        case Kind::mixture: {
            double p0 = 1.0 - a - b;
            if (t < alpha) return p0 + b * (t / alpha);
            return p0 + b + a * ((t - alpha) / (1.0 - alpha));
        }
        }
        return 0.0;
    }

    bool degenerate() const { return kind == Kind::constant; }

    std::string name() const {
        switch (kind) {
        case Kind::constant: return "constant(" + std::to_string(a) + ")";
        case Kind::bernoulli: return "bernoulli(" + std::to_string(a) + ")";
        case Kind::uniform_open: return "uniform_open";
        case Kind::heavy_tail: return "heavy_tail(" + std::to_string(a) + ")";
        case Kind::mixture:
            return "mixture(" + std::to_string(a) + "," + std::to_string(b) + "," +
                   std::to_string(alpha) + ")";
        }
        return "?";
    }

    static const char* kind_name(Kind k) {
        switch (k) {
        case Kind::constant: return "constant";
        case Kind::bernoulli: return "bernoulli";
        case Kind::uniform_open: return "uniform_open";
        case Kind::heavy_tail: return "heavy_tail";
        case Kind::mixture: return "mixture";
        }
        return "?";
    }

    static Kind kind_from_name(const std::string& s) {
        if (s == "constant") return Kind::constant;
        if (s == "bernoulli") return Kind::bernoulli;
        if (s == "uniform_open") return Kind::uniform_open;
        if (s == "heavy_tail") return Kind::heavy_tail;
        if (s == "mixture") return Kind::mixture;
        throw std::invalid_argument("unknown conductance law '" + s + "'");
    }
};

} // namespace rcm
