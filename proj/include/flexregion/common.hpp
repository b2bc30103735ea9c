#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace flexregion {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Base class for all errors thrown by this library.
class FlexError : public std::runtime_error {
  public:
    explicit FlexError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Power flow failed to converge; carries the last power mismatch norm.
class ConvergenceError : public FlexError {
  public:
    ConvergenceError(const std::string& msg, double mismatch)
        : FlexError(msg), mismatch_norm(mismatch) {}
    double mismatch_norm;
};

/// The scheduled operating point already violates a tightened constraint.
class BaseInfeasibleError : public FlexError {
  public:
    BaseInfeasibleError(const std::string& msg, std::string which)
        : FlexError(msg), constraint(std::move(which)) {}
    std::string constraint;
};

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline char phase_char(Phase p) { return "abc"[static_cast<int>(p)]; }

inline Phase phase_from_char(char c) {
    switch (c) {
        case 'a': case 'A': return Phase::A;
        case 'b': case 'B': return Phase::B;
        case 'c': case 'C': return Phase::C;
        default: throw FlexError(std::string("unknown phase '") + c + "'");
    }
}

/// Ordered subset of {a,b,c}. Iteration order is always a, b, c; absent
/// phases are structurally excluded, never zero-padded.
struct PhaseMask {
    std::uint8_t bits = 0;

    static PhaseMask abc() { return PhaseMask{0b111}; }
    static PhaseMask of(std::initializer_list<Phase> ps) {
        PhaseMask m;
        for (Phase p : ps) m.add(p);
        return m;
    }
    static PhaseMask parse(const std::string& s) {
        PhaseMask m;
        for (char c : s) m.add(phase_from_char(c));
        return m;
    }

    bool contains(Phase p) const { return bits & (1u << static_cast<int>(p)); }
    void add(Phase p) { bits |= static_cast<std::uint8_t>(1u << static_cast<int>(p)); }
    bool empty() const { return bits == 0; }
    int count() const {
        return static_cast<int>(contains(Phase::A)) + static_cast<int>(contains(Phase::B)) +
               static_cast<int>(contains(Phase::C));
    }
    PhaseMask intersect(PhaseMask o) const {
        return PhaseMask{static_cast<std::uint8_t>(bits & o.bits)};
    }
    bool subset_of(PhaseMask o) const { return (bits & o.bits) == bits; }

    std::vector<Phase> list() const {
        std::vector<Phase> out;
        for (Phase p : {Phase::A, Phase::B, Phase::C})
            if (contains(p)) out.push_back(p);
        return out;
    }
    std::string str() const {
        std::string s;
        for (Phase p : list()) s += phase_char(p);
        return s;
    }
    bool operator==(const PhaseMask&) const = default;
};

}  // namespace flexregion
