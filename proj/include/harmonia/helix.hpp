#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "harmonia/core.hpp"

namespace harmonia {

class InvalidAngle : public Error {
public:
    using Error::Error;
};

class EmptyOperands : public Error {
public:
    using Error::Error;
};

enum class Strand { Positive, Negative };

// Point on the intertwined double helix. One magnitude unit is one pi turn.
// (Positive, 0) and (Negative, 0) are the distinct +0 / -0 junction points;
// both decode to integer 0.
struct HelixPoint {
    Strand strand = Strand::Positive;
    std::uint64_t mag = 0;

    friend bool operator==(const HelixPoint&, const HelixPoint&) = default;
};

inline HelixPoint encode(std::int64_t z) {
    if (z < 0) return {Strand::Negative, static_cast<std::uint64_t>(-z)};
    return {Strand::Positive, static_cast<std::uint64_t>(z)};
}

inline std::int64_t decode(const HelixPoint& p) {
    const auto m = static_cast<std::int64_t>(p.mag);
    return p.strand == Strand::Negative ? -m : m;
}

namespace detail {

// One CW unit (increase). On the negative strand CW runs toward -0; the
// -0 -> +0 crossing costs no turn, so the step lands on (Positive, 1).
inline HelixPoint cw_step(HelixPoint p) {
    if (p.strand == Strand::Positive) return {Strand::Positive, p.mag + 1};
    if (p.mag == 0) return {Strand::Positive, 1};
    return {Strand::Negative, p.mag - 1};
}

// One CCW unit (decrease), mirror of cw_step.
inline HelixPoint ccw_step(HelixPoint p) {
    if (p.strand == Strand::Negative) return {Strand::Negative, p.mag + 1};
    if (p.mag == 0) return {Strand::Negative, 1};
    return {Strand::Positive, p.mag - 1};
}

inline HelixPoint turn(HelixPoint p, std::uint64_t units, bool clockwise) {
    for (std::uint64_t i = 0; i < units; ++i)
        p = clockwise ? cw_step(p) : ccw_step(p);
    return p;
}

} // namespace detail

// X + Y: turn CW by |Y| units from X (CCW when Y < 0).
inline HelixPoint helix_add(HelixPoint x, std::int64_t y) {
    const bool cw = y >= 0;
    const auto units = static_cast<std::uint64_t>(y >= 0 ? y : -y);
    return detail::turn(x, units, cw);
}

// X - Y: turn CCW by |Y| units from X (CW when Y < 0).
inline HelixPoint helix_sub(HelixPoint x, std::int64_t y) {
    const bool cw = y < 0;
    const auto units = static_cast<std::uint64_t>(y >= 0 ? y : -y);
    return detail::turn(x, units, cw);
}

// X * Y: from +0, |X| repetitions of |Y| units; CW when the signs agree
// (or either factor is zero), CCW otherwise.
inline HelixPoint helix_mul(std::int64_t x, std::int64_t y) {
    const bool cw = x == 0 || y == 0 || (x > 0) == (y > 0);
    const auto reps = static_cast<std::uint64_t>(x >= 0 ? x : -x);
    const auto units = static_cast<std::uint64_t>(y >= 0 ? y : -y);
    HelixPoint p; // +0
    for (std::uint64_t i = 0; i < reps; ++i)
        p = detail::turn(p, units, cw);
    return p;
}

// Predicate placed on the evaluation helix. Truth lives strictly below the
// pi/2 boundary; an absent operand acts as a full inhibitor (score -1).
struct PredicateScore {
    double theta = 0.0;
    double score = 0.0;
    bool present = true;

    double effective_score() const { return present ? score : -1.0; }
    bool truth() const { return effective_score() > 0.0; }
};

inline PredicateScore predicate_score(double theta, bool present) {
    if (!(theta >= 0.0) || theta > std::numbers::pi || !std::isfinite(theta))
        throw InvalidAngle("predicate_score: theta outside [0, pi]");
    PredicateScore p;
    p.theta = theta;
    p.present = present;
    double score = std::cos(theta);
    // cos(pi/2) carries rounding noise; the truth boundary follows the angle.
    if (theta >= std::numbers::pi / 2.0) score = std::min(score, 0.0);
    p.score = present ? score : -1.0;
    return p;
}

// A whole-model conformance score can stand in for a predicate, letting a
// cluster of characteristics be tested as one unit.
inline PredicateScore predicate_from_value(double harmonic_value, bool present = true) {
    PredicateScore p;
    p.theta = std::acos(std::clamp(harmonic_value, -1.0, 1.0));
    p.present = present;
    p.score = present ? harmonic_value : -1.0;
    return p;
}

struct EvalResult {
    double outcome = 0.0;
    bool expanded = false;
};

// Serial expansion: the weakest operand gates the outcome. Injected
// activation can force expansion past an inhibiting (absent) operand.
// Outcome <= 0 is false.
inline EvalResult eval_and(std::span<const PredicateScore> operands,
                           double injected_activation = 0.0) {
    if (operands.empty())
        throw EmptyOperands("eval_and: no operands");
    double lo = operands.front().effective_score();
    for (const auto& op : operands)
        lo = std::min(lo, op.effective_score());
    EvalResult r;
    r.outcome = lo + injected_activation;
    r.expanded = r.outcome > 0.0;
    return r;
}

// Parallel expansion: any conforming operand triggers it; there is no
// inhibitor to overcome, hence no injection parameter.
inline EvalResult eval_or(std::span<const PredicateScore> operands) {
    if (operands.empty())
        throw EmptyOperands("eval_or: no operands");
    double hi = operands.front().effective_score();
    for (const auto& op : operands)
        hi = std::max(hi, op.effective_score());
    EvalResult r;
    r.outcome = hi;
    r.expanded = r.outcome > 0.0;
    return r;
}

inline EvalResult eval_and(const std::vector<PredicateScore>& operands,
                           double injected_activation = 0.0) {
    return eval_and(std::span<const PredicateScore>(operands), injected_activation);
}

inline EvalResult eval_or(const std::vector<PredicateScore>& operands) {
    return eval_or(std::span<const PredicateScore>(operands));
}

} // namespace harmonia
