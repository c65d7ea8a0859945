// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>

#include "constants.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "statistics.hpp"

namespace rydberg
{
    using cplx = std::complex<double>;

    // ------------------------------------------------------------------
    // Closed-form symmetric-state model
    // ------------------------------------------------------------------

    /// Blockade imperfection factor l = 1 + (N-1)^2 |Omega|^2 / (4 N mean_shift^2).
    /// l = 1 for a single atom regardless of mean_shift.
    inline double l_factor(std::size_t n, double rabi, double mean_shift)
    {
        if (n < 1)
            throw std::invalid_argument("l_factor: need at least one atom");
        if (n == 1)
            return 1.0;
        if (!(mean_shift > 0))
            throw std::invalid_argument("l_factor: mean blockade shift must be positive");
        const double nm1 = static_cast<double>(n - 1);
        const double x = rabi / mean_shift;
        return 1.0 + nm1 * nm1 * x * x / (4.0 * static_cast<double>(n));
    }

    struct ExcitationProbabilities
    {
        double ground = 1.0;
        double single = 0.0;
    };

    /// |c_s(t)|^2 = sin^2(sqrt(N l) |Omega| t / 2) / l, starting from c_g(0) = 1.
    inline ExcitationProbabilities analytic_excitation(std::size_t n, double rabi, double mean_shift, double t)
    {
        const double l = l_factor(n, rabi, mean_shift);
        const double s = std::sin(0.5 * std::sqrt(static_cast<double>(n) * l) * std::abs(rabi) * t);
        const double single = s * s / l;
        return {1.0 - single, single};
    }

    inline double pi_pulse_time(std::size_t n, double rabi, double mean_shift)
    {
        if (!(std::abs(rabi) > 0))
            throw std::invalid_argument("pi_pulse_time: Rabi frequency must be nonzero");
        const double l = l_factor(n, rabi, mean_shift);
        return constants::pi / (std::sqrt(static_cast<double>(n) * l) * std::abs(rabi));
    }

    /// Order-of-magnitude leakage into doubly excited states at the end of the pi pulse.
    inline double p_double_estimate(std::size_t n, double rabi, double mean_shift)
    {
        if (n < 2)
            return 0.0;
        const double l = l_factor(n, rabi, mean_shift);
        const double x = rabi / mean_shift;
        return static_cast<double>(n - 1) / (2.0 * l) * x * x;
    }

    /// N gamma_R / mean_shift. Diagnostic only; never applied to probabilities.
    inline double spontaneous_correction(std::size_t n, double gamma_r, double mean_shift)
    {
        if (gamma_r < 0 || !(mean_shift > 0))
            throw std::invalid_argument("spontaneous_correction: need gamma_R >= 0 and mean_shift > 0");
        return static_cast<double>(n) * gamma_r / mean_shift;
    }

    // ------------------------------------------------------------------
    // Pulses and collective state
    // ------------------------------------------------------------------

    enum class Transition
    {
        ground_to_rydberg,            // b -> r at omega
        rydberg_to_lower,             // r -> a at omega'
        lower_to_rydberg_two_photon,  // a -> e -> r via omega_1, omega_2
        rydberg_to_intermediate,      // r -> e at omega_3
    };

    enum class Level
    {
        b,
        a,
        r,
        e,
    };

    inline const char* to_string(Level l)
    {
        switch (l)
        {
        case Level::b: return "b";
        case Level::a: return "a";
        case Level::r: return "r";
        case Level::e: return "e";
        }
        return "?";
    }

    struct PulseSpec
    {
        double rabi = 0.0;                  // |Omega|, rad/s
        Vec3 wavevector = Vec3::Zero();     // phases phi_j = k . r_j
        double duration = 0.0;              // s
        Transition transition = Transition::ground_to_rydberg;
        std::optional<double> start;        // unset: immediately after the previous pulse

        /// Effective a -> r drive: |Omega| = |Omega_1||Omega_2| / Delta_e, k = k_1 + k_2.
        static PulseSpec two_photon(double rabi1, const Vec3& k1, double rabi2, const Vec3& k2,
                                    double intermediate_detuning, double duration)
        {
            if (!(std::abs(intermediate_detuning) > 0))
                throw std::invalid_argument("two_photon: intermediate detuning must be nonzero");
            PulseSpec p;
            p.rabi = std::abs(rabi1) * std::abs(rabi2) / std::abs(intermediate_detuning);
            p.wavevector = k1 + k2;
            p.duration = duration;
            p.transition = Transition::lower_to_rydberg_two_photon;
            return p;
        }

        bool is_drive() const
        {
            return transition == Transition::ground_to_rydberg ||
                   transition == Transition::lower_to_rydberg_two_photon;
        }

        void validate() const
        {
            if (rabi < 0 || duration < 0)
                throw std::invalid_argument("PulseSpec: rabi magnitude and duration must be >= 0");
        }
    };

    enum class PhaseConvention
    {
        lab,       // bare amplitudes c~ (phases live in the Hamiltonian)
        absorbed,  // c_j = c~_j e^{-i phi_j}, c_jk = c~_jk e^{-i(phi_j + phi_k)}
    };

    /// Amplitudes over {g, r_1..r_N, r_j r_k (j<k, lexicographic)}.
    /// `reference` is the level of unexcited atoms, `excited` that of excited ones.
    struct CollectiveState
    {
        std::size_t atoms = 0;
        Eigen::VectorXcd amplitudes;
        Level reference = Level::b;
        Level excited = Level::r;
        PhaseConvention convention = PhaseConvention::lab;

        static std::size_t dimension_for(std::size_t n) { return 1 + n + n * (n - 1) / 2; }

        static std::size_t pair_index(std::size_t j, std::size_t k, std::size_t n)
        {
            if (j > k)
                std::swap(j, k);
            return 1 + n + j * (2 * n - j - 1) / 2 + (k - j - 1);
        }

        static CollectiveState ground_state(std::size_t n, Level reference = Level::b)
        {
            if (n < 1)
                throw std::invalid_argument("CollectiveState: need at least one atom");
            CollectiveState s;
            s.atoms = n;
            s.reference = reference;
            s.amplitudes = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dimension_for(n)));
            s.amplitudes[0] = 1.0;
            return s;
        }

        std::size_t dimension() const { return static_cast<std::size_t>(amplitudes.size()); }
        cplx ground() const { return amplitudes[0]; }
        cplx single(std::size_t j) const { return amplitudes[static_cast<Eigen::Index>(1 + j)]; }
        cplx pair(std::size_t j, std::size_t k) const
        {
            return amplitudes[static_cast<Eigen::Index>(pair_index(j, k, atoms))];
        }

        double norm_squared() const { return amplitudes.squaredNorm(); }
        double p_zero() const { return std::norm(amplitudes[0]); }
        double p_single() const { return amplitudes.segment(1, static_cast<Eigen::Index>(atoms)).squaredNorm(); }
        double p_double() const
        {
            const auto start = static_cast<Eigen::Index>(1 + atoms);
            return amplitudes.segment(start, amplitudes.size() - start).squaredNorm();
        }
    };

    /// Converts lab-frame amplitudes to the phase-absorbed convention.
    inline CollectiveState absorb_phases(const CollectiveState& state, std::span<const double> phases)
    {
        if (state.convention == PhaseConvention::absorbed)
            return state;
        if (phases.size() != state.atoms)
            throw std::invalid_argument("absorb_phases: one phase per atom required");
        CollectiveState out = state;
        const auto n = state.atoms;
        for (std::size_t j = 0; j < n; ++j)
        {
            out.amplitudes[static_cast<Eigen::Index>(1 + j)] *= std::polar(1.0, -phases[j]);
            for (std::size_t k = j + 1; k < n; ++k)
                out.amplitudes[static_cast<Eigen::Index>(CollectiveState::pair_index(j, k, n))] *=
                    std::polar(1.0, -(phases[j] + phases[k]));
        }
        out.convention = PhaseConvention::absorbed;
        return out;
    }

    inline std::vector<double> traveling_wave_phases(const AtomCloud& cloud, const Vec3& k)
    {
        std::vector<double> phases(cloud.size());
        for (std::size_t j = 0; j < cloud.size(); ++j)
            phases[j] = k.dot(cloud.positions[j]);
        return phases;
    }

    /// Overlap with |s> = N^{-1/2} sum_j e^{i phi_j} |r_j>.
    inline cplx symmetric_amplitude(const CollectiveState& state, std::span<const double> phases)
    {
        if (phases.size() != state.atoms)
            throw std::invalid_argument("symmetric_amplitude: one phase per atom required");
        cplx sum = 0.0;
        for (std::size_t j = 0; j < state.atoms; ++j)
        {
            const double phi = state.convention == PhaseConvention::lab ? phases[j] : 0.0;
            sum += std::polar(1.0, -phi) * state.single(j);
        }
        return sum / std::sqrt(static_cast<double>(state.atoms));
    }

    // ------------------------------------------------------------------
    // Truncated-subspace Hamiltonian and integrator
    // ------------------------------------------------------------------

    /// H / hbar in rad/s on the CollectiveState basis.
    struct Hamiltonian
    {
        std::size_t atoms = 0;
        Eigen::SparseMatrix<cplx, Eigen::RowMajor> matrix;
    };

    struct BlockadeOptions
    {
        bool allow_weak_blockade = false;
        double max_rabi_to_shift = 0.3;
    };

    /// Resonant drive g <-> r_j <-> r_j r_k with Omega_j = |Omega| e^{i k.r_j},
    /// plus Delta_jk on the doubly excited diagonal.
    inline Hamiltonian build_hamiltonian(const AtomCloud& cloud, const RydbergCoupling& coupling,
                                         const PulseSpec& pulse, const BlockadeOptions& options = {})
    {
        pulse.validate();
        if (!pulse.is_drive())
            throw std::invalid_argument("build_hamiltonian: transfer pulses are applied as ideal relabelings");
        const auto n = cloud.size();
        if (n < 1)
            throw std::invalid_argument("build_hamiltonian: empty cloud");

        if (n >= 2 && !options.allow_weak_blockade && pulse.rabi > 0)
        {
            const double ratio = pulse.rabi / min_pair_shift(cloud, coupling);
            if (ratio > options.max_rabi_to_shift)
                throw std::invalid_argument(fmt::format(
                    "build_hamiltonian: |Omega|/min|Delta_jk| = {:.3g} exceeds {:.3g}; the "
                    "double-excitation truncation is not valid (set allow_weak_blockade to override)",
                    ratio, options.max_rabi_to_shift));
        }

        std::vector<cplx> omega(n);
        for (std::size_t j = 0; j < n; ++j)
            omega[j] = std::polar(pulse.rabi, pulse.wavevector.dot(cloud.positions[j]));

        using Triplet = Eigen::Triplet<cplx>;
        std::vector<Triplet> t;
        t.reserve(1 + 2 * n + 5 * (n * (n - 1) / 2));
        for (std::size_t j = 0; j < n; ++j)
        {
            const auto sj = static_cast<int>(1 + j);
            t.emplace_back(sj, 0, 0.5 * omega[j]);
            t.emplace_back(0, sj, 0.5 * std::conj(omega[j]));
        }
        for (std::size_t j = 0; j < n; ++j)
        {
            for (std::size_t k = j + 1; k < n; ++k)
            {
                const auto p = static_cast<int>(CollectiveState::pair_index(j, k, n));
                const auto sj = static_cast<int>(1 + j);
                const auto sk = static_cast<int>(1 + k);
                t.emplace_back(p, sj, 0.5 * omega[k]);
                t.emplace_back(sj, p, 0.5 * std::conj(omega[k]));
                t.emplace_back(p, sk, 0.5 * omega[j]);
                t.emplace_back(sk, p, 0.5 * std::conj(omega[j]));
                t.emplace_back(p, p, cplx(pair_shift(coupling, cloud.positions[j], cloud.positions[k]), 0.0));
            }
        }
        Hamiltonian h;
        h.atoms = n;
        const auto dim = static_cast<Eigen::Index>(CollectiveState::dimension_for(n));
        h.matrix.resize(dim, dim);
        h.matrix.setFromTriplets(t.begin(), t.end());
        h.matrix.makeCompressed();
        return h;
    }

    enum class EvolveMethod
    {
        automatic,               // RKF78 unless the run is stiff
        runge_kutta_fehlberg78,  // adaptive step size, embedded 7(8) error estimate
        spectral,                // exact: Hermitian eigendecomposition of the pulse Hamiltonian
        chebyshev,               // adaptive-order Chebyshev expansion of exp(-iHt)
    };

    struct EvolveDiagnostics
    {
        EvolveMethod method_used = EvolveMethod::runge_kutta_fehlberg78;
        std::size_t steps_accepted = 0;
        std::size_t steps_rejected = 0;
        std::size_t matvecs = 0;
        double smallest_step = std::numeric_limits<double>::infinity();
        double norm_drift = 0.0;  // |<psi|psi>_final - <psi|psi>_initial|
    };

    struct EvolveOptions
    {
        double tolerance = 1e-12;              // absolute and relative local error
        EvolveMethod method = EvolveMethod::automatic;
        std::size_t max_steps = 200'000'000;
        double max_norm_drift = 1e-6;          // beyond this the run is reported as failed
        // automatic leaves RKF78 above this spectral width * duration (rad), using
        // the eigendecomposition up to spectral_max_dimension and Chebyshev beyond
        double stiffness_threshold = 2.0e3;
        std::size_t spectral_max_dimension = 1500;
    };

    namespace detail
    {
        using SparseH = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

        struct SpectralBounds
        {
            double lower = 0.0;
            double upper = 0.0;
        };

        // Gershgorin discs of a Hermitian matrix.
        inline SpectralBounds gershgorin(const SparseH& h)
        {
            SpectralBounds b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
            for (Eigen::Index r = 0; r < h.outerSize(); ++r)
            {
                double diag = 0.0, off = 0.0;
                for (SparseH::InnerIterator it(h, r); it; ++it)
                {
                    if (it.col() == r)
                        diag = it.value().real();
                    else
                        off += std::abs(it.value());
                }
                b.lower = std::min(b.lower, diag - off);
                b.upper = std::max(b.upper, diag + off);
            }
            return b;
        }

        inline void evolve_rkf78(Eigen::VectorXcd& psi, const SparseH& h, double duration,
                                 const EvolveOptions& options, const SpectralBounds& bounds, EvolveDiagnostics& d)
        {
            namespace odeint = boost::numeric::odeint;
            using state_type = std::vector<cplx>;

            const auto dim = psi.size();
            auto rhs = [&h, &d, dim](const state_type& x, state_type& dxdt, double /*t*/) {
                Eigen::Map<const Eigen::VectorXcd> xv(x.data(), dim);
                Eigen::Map<Eigen::VectorXcd> dv(dxdt.data(), dim);
                dv.noalias() = h * xv;
                dv *= cplx(0.0, -1.0);
                ++d.matvecs;
            };

            const double width = std::max(std::abs(bounds.lower), std::abs(bounds.upper));
            state_type x(psi.data(), psi.data() + dim);
            auto stepper = odeint::make_controlled<odeint::runge_kutta_fehlberg78<state_type>>(
                options.tolerance, options.tolerance);

            double t = 0.0;
            double dt = width > 0 ? std::min(duration, 0.1 / width) : duration;
            const double min_dt = duration * 1e-15;
            while (t < duration)
            {
                if (d.steps_accepted + d.steps_rejected >= options.max_steps)
                    throw NumericalError(fmt::format(
                        "evolve: exceeded {} steps at t = {:.6g} s of {:.6g} s (spectral bound {:.3g} rad/s)",
                        options.max_steps, t, duration, width));
                const double remaining = duration - t;
                const bool last = dt >= remaining;
                double step = last ? remaining : dt;
                const double t_before = t;
                if (stepper.try_step(rhs, x, t, step) == odeint::success)
                {
                    ++d.steps_accepted;
                    d.smallest_step = std::min(d.smallest_step, t - t_before);
                    if (last)
                        t = duration;
                    else
                        dt = step;
                }
                else
                {
                    ++d.steps_rejected;
                    dt = step;
                    if (dt < min_dt)
                        throw NumericalError(fmt::format(
                            "evolve: step size underflow (dt = {:.3g} s) at t = {:.6g} s; "
                            "accepted {}, rejected {} steps, tolerance {:.3g}",
                            dt, t, d.steps_accepted, d.steps_rejected, options.tolerance));
                }
            }
            psi = Eigen::Map<const Eigen::VectorXcd>(x.data(), dim);
        }

        // exp(-i H dt) psi = e^{-i c dt} sum_k (2 - delta_k0) (-i)^k J_k(w dt) T_k(Hn) psi,
        // Hn = (H - c) / w, over chunks of fixed phase width so that the series
        // is short. The order per chunk adapts until |J_k| falls below tolerance.
        inline void evolve_chebyshev(Eigen::VectorXcd& psi, const SparseH& h, double duration,
                                     const EvolveOptions& options, const SpectralBounds& bounds,
                                     EvolveDiagnostics& d)
        {
            const double centre = 0.5 * (bounds.upper + bounds.lower);
            const double half_width = std::max(0.5 * (bounds.upper - bounds.lower), 1e-300);
            constexpr double chunk_phase = 40.0;
            const double total_phase = half_width * duration;
            const auto chunks = static_cast<std::size_t>(std::max(1.0, std::ceil(total_phase / chunk_phase)));
            if (chunks > options.max_steps)
                throw NumericalError(fmt::format("evolve: Chebyshev run needs {} chunks, limit {}", chunks,
                                                 options.max_steps));
            const double dt = duration / static_cast<double>(chunks);
            const double arg = half_width * dt;

            std::vector<double> coeff;
            const double cutoff = options.tolerance * 1e-2;
            for (std::size_t k = 0;; ++k)
            {
                const double jk = std::cyl_bessel_j(static_cast<double>(k), arg);
                coeff.push_back(k == 0 ? jk : 2.0 * jk);
                if (static_cast<double>(k) > arg && std::abs(jk) < cutoff)
                    break;
                if (k > 100000)
                    throw NumericalError("evolve: Chebyshev series did not converge");
            }

            const auto dim = psi.size();
            Eigen::VectorXcd prev(dim), cur(dim), next(dim), acc(dim);
            auto apply_normalized = [&](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
                out.noalias() = h * in;
                out -= centre * in;
                out /= half_width;
                ++d.matvecs;
            };
            const cplx global = std::polar(1.0, -centre * dt);
            const cplx minus_i(0.0, -1.0);
            for (std::size_t c = 0; c < chunks; ++c)
            {
                prev = psi;
                acc = coeff[0] * prev;
                if (coeff.size() > 1)
                {
                    apply_normalized(prev, cur);
                    acc += coeff[1] * minus_i * cur;
                    cplx phase = minus_i;
                    for (std::size_t k = 2; k < coeff.size(); ++k)
                    {
                        apply_normalized(cur, next);
                        next = 2.0 * next - prev;
                        phase *= minus_i;
                        acc += (coeff[k] * phase) * next;
                        prev.swap(cur);
                        cur.swap(next);
                    }
                }
                psi = global * acc;
                ++d.steps_accepted;
            }
            d.smallest_step = dt;
        }
    }

    namespace detail
    {
        inline void evolve_spectral(Eigen::VectorXcd& psi, const SparseH& h, double duration, EvolveDiagnostics& d)
        {
            const Eigen::MatrixXcd dense(h);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense);
            if (solver.info() != Eigen::Success)
                throw NumericalError("evolve: eigendecomposition of the pulse Hamiltonian failed");
            Eigen::VectorXcd coeff = solver.eigenvectors().adjoint() * psi;
            const auto& energies = solver.eigenvalues();
            for (Eigen::Index i = 0; i < coeff.size(); ++i)
                coeff[i] *= std::polar(1.0, -energies[i] * duration);
            psi = solver.eigenvectors() * coeff;
            d.steps_accepted = 1;
            d.smallest_step = duration;
        }
    }

    /// Integrates i d(psi)/dt = H psi. The default stepper is adaptive
    /// Runge-Kutta-Fehlberg 7(8); when the spectral width times the duration is
    /// large (close atom pairs) the pulse propagator is built from the
    /// eigendecomposition of H, or from a Chebyshev expansion for large bases.
    /// The state is never renormalized; drift is reported in `diag` and a run
    /// whose drift exceeds options.max_norm_drift fails.
    inline CollectiveState evolve(const CollectiveState& state, const Hamiltonian& hamiltonian, double duration,
                                  const EvolveOptions& options = {}, EvolveDiagnostics* diag = nullptr)
    {
        if (state.convention != PhaseConvention::lab)
            throw std::invalid_argument("evolve: state must use the lab phase convention");
        if (state.dimension() != static_cast<std::size_t>(hamiltonian.matrix.rows()))
            throw std::invalid_argument("evolve: state and Hamiltonian dimensions differ");
        const double norm0 = state.norm_squared();
        if (std::abs(norm0 - 1.0) > 1e-9)
            throw std::invalid_argument(fmt::format("evolve: input state not normalized (|psi|^2 = {:.12g})", norm0));
        if (duration < 0)
            throw std::invalid_argument("evolve: negative duration");

        EvolveDiagnostics local;
        EvolveDiagnostics& d = diag ? *diag : local;
        d = {};

        CollectiveState out = state;
        if (duration == 0.0 || hamiltonian.matrix.nonZeros() == 0)
            return out;

        const auto bounds = detail::gershgorin(hamiltonian.matrix);
        EvolveMethod method = options.method;
        if (method == EvolveMethod::automatic)
        {
            if ((bounds.upper - bounds.lower) * duration <= options.stiffness_threshold)
                method = EvolveMethod::runge_kutta_fehlberg78;
            else if (state.dimension() <= options.spectral_max_dimension)
                method = EvolveMethod::spectral;
            else
                method = EvolveMethod::chebyshev;
        }
        d.method_used = method;
        if (method == EvolveMethod::spectral)
            detail::evolve_spectral(out.amplitudes, hamiltonian.matrix, duration, d);
        else if (method == EvolveMethod::chebyshev)
            detail::evolve_chebyshev(out.amplitudes, hamiltonian.matrix, duration, options, bounds, d);
        else
            detail::evolve_rkf78(out.amplitudes, hamiltonian.matrix, duration, options, bounds, d);

        d.norm_drift = std::abs(out.norm_squared() - norm0);
        if (d.norm_drift > options.max_norm_drift)
            throw NumericalError(fmt::format(
                "evolve: norm drift {:.3g} exceeds {:.3g} after {} steps; tighten the tolerance",
                d.norm_drift, options.max_norm_drift, d.steps_accepted));
        return out;
    }

    // ------------------------------------------------------------------
    // Pulse sequences
    // ------------------------------------------------------------------

    struct BlockadeSummary
    {
        double l_factor = 1.0;
        double t_pi = 0.0;
        double p_zero = 1.0;
        double p_single = 0.0;
        double p_double = 0.0;
        double spontaneous_correction = 0.0;
    };

    struct SequenceOptions
    {
        EvolveOptions evolve;
        BlockadeOptions blockade;
        Level initial_reference = Level::b;
    };

    struct SequenceResult
    {
        CollectiveState state;
        BlockadeSummary summary;
    };

    namespace detail
    {
        inline bool has_excitation(const CollectiveState& s)
        {
            return s.p_single() + s.p_double() > 1e-14;
        }

        // Ideal pi pulse taking every excited atom r -> target with phase -k.r_j.
        inline void relabel_excitations(CollectiveState& s, const AtomCloud& cloud, const Vec3& k, Level target)
        {
            if (s.excited != Level::r && has_excitation(s))
                throw std::invalid_argument(fmt::format(
                    "transfer pulse expects Rydberg excitations, state holds level {}", to_string(s.excited)));
            const auto n = s.atoms;
            const cplx minus_i(0.0, -1.0);
            for (std::size_t j = 0; j < n; ++j)
            {
                const double pj = k.dot(cloud.positions[j]);
                s.amplitudes[static_cast<Eigen::Index>(1 + j)] *= minus_i * std::polar(1.0, -pj);
                for (std::size_t kk = j + 1; kk < n; ++kk)
                {
                    const double pk = k.dot(cloud.positions[kk]);
                    s.amplitudes[static_cast<Eigen::Index>(CollectiveState::pair_index(j, kk, n))] *=
                        -std::polar(1.0, -(pj + pk));
                }
            }
            s.excited = target;
        }

        // Free evolution between pulses: only r_j r_k pick up Delta_jk phases.
        inline void free_evolution(CollectiveState& s, const AtomCloud& cloud, const RydbergCoupling& coupling,
                                   double gap)
        {
            if (gap <= 0 || s.excited != Level::r)
                return;
            const auto n = s.atoms;
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k)
                    s.amplitudes[static_cast<Eigen::Index>(CollectiveState::pair_index(j, k, n))] *=
                        std::polar(1.0, -pair_shift(coupling, cloud.positions[j], cloud.positions[k]) * gap);
        }
    }

    /// Applies pulses strictly one after another starting from all atoms in
    /// `initial_reference`. Drive pulses are integrated; transfer pulses are
    /// ideal pi-pulse relabelings.
    inline SequenceResult run_preparation_sequence(const AtomCloud& cloud, const RydbergCoupling& coupling,
                                                   std::span<const PulseSpec> pulses,
                                                   const SequenceOptions& options = {})
    {
        const auto n = cloud.size();
        SequenceResult result{CollectiveState::ground_state(n, options.initial_reference), {}};
        auto& s = result.state;

        // Windows must not overlap: simultaneous omega and omega' driving
        // produces multiphoton Raman leakage that this model does not contain.
        bool first_drive = true;
        double t_end = 0.0;
        for (std::size_t i = 0; i < pulses.size(); ++i)
        {
            const auto& p = pulses[i];
            p.validate();
            const double start = p.start.value_or(t_end);
            const double slack = 1e-12 * std::max(t_end, 1e-9);
            if (start < t_end - slack)
                throw std::invalid_argument(fmt::format(
                    "run_preparation_sequence: pulse {} starts at {:.6g} s before pulse {} ends at {:.6g} s; "
                    "pulses must be applied sequentially, overlapping windows are rejected",
                    i, start, i - 1, t_end));
            detail::free_evolution(s, cloud, coupling, start - t_end);
            t_end = start + p.duration;

            switch (p.transition)
            {
            case Transition::ground_to_rydberg:
            case Transition::lower_to_rydberg_two_photon:
            {
                const Level needed =
                    p.transition == Transition::ground_to_rydberg ? Level::b : Level::a;
                if (s.reference != needed)
                    throw std::invalid_argument(fmt::format(
                        "run_preparation_sequence: drive from level {} but unexcited atoms are in {}",
                        to_string(needed), to_string(s.reference)));
                if (s.excited != Level::r && detail::has_excitation(s))
                    throw std::invalid_argument("run_preparation_sequence: drive pulse applied to a state with "
                                                "non-Rydberg excitations");
                s.excited = Level::r;
                const auto h = build_hamiltonian(cloud, coupling, p, options.blockade);
                s = evolve(s, h, p.duration, options.evolve);
                if (first_drive)
                {
                    first_drive = false;
                    auto& sum = result.summary;
                    if (n >= 2)
                    {
                        const double mean_shift = mean_blockade_shift(cloud, coupling);
                        sum.l_factor = l_factor(n, p.rabi, mean_shift);
                        sum.spontaneous_correction =
                            spontaneous_correction(n, cloud.species.rydberg_decay, mean_shift);
                        sum.t_pi = p.rabi > 0 ? pi_pulse_time(n, p.rabi, mean_shift) : 0.0;
                    }
                    else
                    {
                        sum.t_pi = p.rabi > 0 ? constants::pi / p.rabi : 0.0;
                    }
                }
                break;
            }
            case Transition::rydberg_to_lower:
                if (s.reference != Level::b)
                    throw std::invalid_argument("run_preparation_sequence: r -> a transfer needs unexcited atoms in b");
                detail::relabel_excitations(s, cloud, p.wavevector, Level::a);
                break;
            case Transition::rydberg_to_intermediate:
                detail::relabel_excitations(s, cloud, p.wavevector, Level::e);
                break;
            }
        }

        result.summary.p_zero = s.p_zero();
        result.summary.p_single = s.p_single();
        result.summary.p_double = s.p_double();
        return result;
    }

    // ------------------------------------------------------------------
    // Atom-pulse scheduling
    // ------------------------------------------------------------------

    struct ScheduleReport
    {
        std::size_t atoms = 0;
        std::size_t excitations = 0;  // m
        double preparation_time = 0.0;
        double cycle_time = 0.0;
        std::size_t repetitions = 0;
        double pulse_rate = 0.0;  // Hz
    };

    /// m blockade cycles with collective Rabi frequencies sqrt(N - i)|Omega|,
    /// followed by one ejection; repeated floor(N/m) times per loaded trap.
    inline ScheduleReport m_excitation_schedule(std::size_t n, std::size_t m, double rabi, double eject_time)
    {
        if (m < 1)
            throw std::invalid_argument("m_excitation_schedule: m must be >= 1");
        if (m > n)
            throw std::invalid_argument(fmt::format("m_excitation_schedule: m = {} exceeds N = {}", m, n));
        if (!(rabi > 0))
            throw std::invalid_argument("m_excitation_schedule: Rabi frequency must be positive");
        if (eject_time < 0)
            throw std::invalid_argument("m_excitation_schedule: eject time must be >= 0");
        ScheduleReport r;
        r.atoms = n;
        r.excitations = m;
        for (std::size_t i = 0; i < m; ++i)
            r.preparation_time += constants::pi / (std::sqrt(static_cast<double>(n - i)) * rabi);
        r.cycle_time = r.preparation_time + eject_time;
        r.repetitions = n / m;
        r.pulse_rate = 1.0 / r.cycle_time;
        return r;
    }

    // ------------------------------------------------------------------
    // Leakage scan over atom number
    // ------------------------------------------------------------------

    struct ScanParams
    {
        double diameter = 5.0e-6;
        RydbergCoupling coupling = RydbergCoupling::calibrated(50);
        double rabi = constants::two_pi * 1.0e6;
        std::uint64_t master_seed = 1;
        bool full_integrator = false;
        std::size_t integrator_cap = 12;
        EvolveOptions evolve{1e-10};
        unsigned workers = 0;
        AtomicSpecies species;
    };

    struct ScanRow
    {
        std::size_t atoms = 0;
        double p_zero_mean = 0.0;
        double p_zero_stderr = 0.0;
        double p_double_mean = 0.0;
        double p_double_stderr = 0.0;
        double delta_bar_mean = std::numeric_limits<double>::quiet_NaN();  // rad/s

        bool has_full = false;
        double p_zero_full_mean = 0.0;
        double p_zero_full_stderr = 0.0;
        double p_double_full_mean = 0.0;
        double p_double_full_stderr = 0.0;
    };

    namespace detail
    {
        struct TrialOutcome
        {
            double p_zero = 0.0;
            double p_double = 0.0;
            double delta_bar = std::numeric_limits<double>::quiet_NaN();
            double p_zero_full = 0.0;
            double p_double_full = 0.0;
        };
    }

    /// For each N: sample `trials` clouds, evaluate the closed-form P_zero and
    /// P_double estimate from the cloud's mean blockade shift, and optionally
    /// integrate the full truncated dynamics for N <= integrator_cap.
    /// Trial seeds derive from (master_seed, N, trial) so rows are independent of
    /// worker count.
    inline std::vector<ScanRow> fig1_scan(std::span<const std::size_t> n_values, std::size_t trials,
                                          const ScanParams& params)
    {
        if (trials < 1)
            throw std::invalid_argument("fig1_scan: trials must be >= 1");
        for (auto n : n_values)
            if (n < 1)
                throw std::invalid_argument("fig1_scan: atom numbers must be >= 1");

        const std::size_t total = n_values.size() * trials;
        std::vector<detail::TrialOutcome> outcomes(total);
        parallel_for(total, params.workers, [&](std::size_t idx) {
            const std::size_t row = idx / trials;
            const std::size_t trial = idx % trials;
            const std::size_t n = n_values[row];
            const auto seed = derive_seed(params.master_seed, {static_cast<std::uint64_t>(n), trial});
            const auto cloud = sample_cloud(n, params.diameter, seed, params.species);
            auto& o = outcomes[idx];
            double t_pi = constants::pi / params.rabi;
            if (n >= 2)
            {
                o.delta_bar = mean_blockade_shift(cloud, params.coupling);
                const double l = l_factor(n, params.rabi, o.delta_bar);
                o.p_zero = 1.0 - 1.0 / l;
                o.p_double = p_double_estimate(n, params.rabi, o.delta_bar);
                t_pi = pi_pulse_time(n, params.rabi, o.delta_bar);
            }
            if (params.full_integrator && n <= params.integrator_cap)
            {
                PulseSpec pulse;
                pulse.rabi = params.rabi;
                pulse.duration = t_pi;
                const auto h = build_hamiltonian(cloud, params.coupling, pulse);
                const auto s = evolve(CollectiveState::ground_state(n), h, t_pi, params.evolve);
                o.p_zero_full = s.p_zero();
                o.p_double_full = s.p_double();
            }
        });

        std::vector<ScanRow> rows;
        rows.reserve(n_values.size());
        std::vector<double> pz(trials), pd(trials), db(trials), pzf(trials), pdf(trials);
        for (std::size_t r = 0; r < n_values.size(); ++r)
        {
            for (std::size_t t = 0; t < trials; ++t)
            {
                const auto& o = outcomes[r * trials + t];
                pz[t] = o.p_zero;
                pd[t] = o.p_double;
                db[t] = o.delta_bar;
                pzf[t] = o.p_zero_full;
                pdf[t] = o.p_double_full;
            }
            ScanRow row;
            row.atoms = n_values[r];
            row.p_zero_mean = stats::mean(pz);
            row.p_zero_stderr = stats::standard_error(pz);
            row.p_double_mean = stats::mean(pd);
            row.p_double_stderr = stats::standard_error(pd);
            if (row.atoms >= 2)
                row.delta_bar_mean = stats::mean(db);
            if (params.full_integrator && row.atoms <= params.integrator_cap)
            {
                row.has_full = true;
                row.p_zero_full_mean = stats::mean(pzf);
                row.p_zero_full_stderr = stats::standard_error(pzf);
                row.p_double_full_mean = stats::mean(pdf);
                row.p_double_full_stderr = stats::standard_error(pdf);
            }
            rows.push_back(row);
        }
        return rows;
    }
}
