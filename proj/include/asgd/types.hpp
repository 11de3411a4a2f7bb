#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace asgd
{
    using Vector = Eigen::VectorXd;
    using Matrix = Eigen::MatrixXd;

    // Workers are numbered 0..M-1. Iterations start at 1; iteration 0 is the
    // initial dispatch of every worker at x_0.
    using WorkerId = int;
    using Iteration = std::int64_t;

    /// A caller broke a documented precondition (bad worker id, invalid constants, ...).
    class ContractViolation : public std::logic_error
    {
    public:
        using std::logic_error::logic_error;
    };

    /// Iterates left the finite region; carries the iteration at which it was detected.
    class DivergenceError : public std::runtime_error
    {
    public:
        DivergenceError(Iteration k, const std::string &what)
            : std::runtime_error(what), m_iteration(k) {}

        Iteration iteration() const noexcept { return m_iteration; }

    private:
        Iteration m_iteration;
    };

    inline void require(bool cond, const std::string &what)
    {
        if (!cond)
        {
            throw ContractViolation(what);
        }
    }
} // namespace asgd
