// Fin thrust, pulsed jet and fin control allocation.
#pragma once

#include "ursula/core.hpp"
#include "ursula/dynamics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ursula::propulsion {

using dynamics::Wrench;

enum class FinId { BowPort, BowStbd, SternPort, SternStbd, CentralPort, CentralStbd };

inline constexpr std::array<FinId, 6> kAllFins{FinId::BowPort,   FinId::BowStbd,
                                               FinId::SternPort, FinId::SternStbd,
                                               FinId::CentralPort, FinId::CentralStbd};

inline std::string to_string(FinId id) {
    switch (id) {
    case FinId::BowPort: return "bow_port";
    case FinId::BowStbd: return "bow_stbd";
    case FinId::SternPort: return "stern_port";
    case FinId::SternStbd: return "stern_stbd";
    case FinId::CentralPort: return "central_port";
    case FinId::CentralStbd: return "central_stbd";
    }
    return "unknown";
}

inline std::optional<FinId> fin_from_string(const std::string& s) {
    for (FinId id : kAllFins) {
        if (to_string(id) == s) return id;
    }
    return std::nullopt;
}

/// +1 for starboard fins, -1 for port fins.
inline double fin_side(FinId id) {
    switch (id) {
    case FinId::BowStbd:
    case FinId::SternStbd:
    case FinId::CentralStbd: return 1.0;
    default: return -1.0;
    }
}

enum class FinMode { StandingWave, TravelingWave };

struct FinState {
    FinId id = FinId::BowPort;
    /// Swivel [rad] in [-pi/2, pi/2]. At -pi/2 the thrust points forward, at 0
    /// outboard, at +pi/2 aft; port fins mirror starboard fins.
    double swivel = 0.0;
    FinMode mode = FinMode::StandingWave;
    double amplitude = 0.0; ///< [rad]
    double frequency = 0.0; ///< [Hz]
    double phase = 0.0;     ///< [rad], no effect on cycle-averaged thrust

    bool operator==(const FinState&) const = default;
};

struct FinMount {
    double x = 0.0; ///< body x of the fin's centre of thrust [m]
    double y = 0.0; ///< body y [m]
};

struct FinParams {
    double thrust_coeff = 4.0;  ///< k_t [N / (rad^2 Hz^2)]
    double tw_efficiency = 0.8; ///< eta for the traveling-wave mode
    double amplitude_max = 0.5; ///< [rad]
    double frequency_max = 3.0; ///< [Hz]
    std::map<FinId, FinMount> mounts{
        {FinId::BowPort, {0.35, -0.15}},    {FinId::BowStbd, {0.35, 0.15}},
        {FinId::SternPort, {-0.35, -0.15}}, {FinId::SternStbd, {-0.35, 0.15}},
        {FinId::CentralPort, {0.0, -0.15}}, {FinId::CentralStbd, {0.0, 0.15}},
    };

    double mode_factor(FinMode m) const {
        return m == FinMode::StandingWave ? 1.0 : tw_efficiency;
    }
    /// Largest cycle-averaged thrust a fin can produce in mode `m`.
    double max_thrust(FinMode m) const {
        return thrust_coeff * mode_factor(m) * amplitude_max * amplitude_max * frequency_max *
               frequency_max;
    }
};

inline void validate(const FinParams& p) {
    if (!(p.thrust_coeff > 0 && p.tw_efficiency > 0 && p.amplitude_max > 0 &&
          p.frequency_max > 0)) {
        throw Error(ErrorCode::InvalidArgument, "fin params: coefficients must be positive");
    }
}

/// Cycle-averaged thrust magnitude T = k_t * eta * A^2 * f^2.
inline double fin_thrust(const FinState& fin, const FinParams& params) {
    return params.thrust_coeff * params.mode_factor(fin.mode) * fin.amplitude * fin.amplitude *
           fin.frequency * fin.frequency;
}

/// Body-plane angle of the thrust vector (0 = forward, +pi/2 = starboard).
inline double thrust_direction(const FinState& fin) {
    return fin_side(fin.id) * (fin.swivel + kPi / 2.0);
}

inline void validate(const FinState& fin, const FinParams& params) {
    require_finite({fin.swivel, fin.amplitude, fin.frequency, fin.phase}, "fin state");
    constexpr double eps = 1e-12;
    if (std::abs(fin.swivel) > kPi / 2.0 + eps) {
        throw Error(ErrorCode::OutOfRange, "fin " + to_string(fin.id) + ": swivel beyond +-pi/2");
    }
    if (fin.frequency < 0.0) {
        throw Error(ErrorCode::OutOfRange, "fin " + to_string(fin.id) + ": negative frequency");
    }
    if (fin.amplitude < 0.0 || fin.amplitude > params.amplitude_max + eps) {
        throw Error(ErrorCode::OutOfRange, "fin " + to_string(fin.id) + ": amplitude out of range");
    }
}

inline const FinMount& mount_of(FinId id, const FinParams& params) {
    auto it = params.mounts.find(id);
    if (it == params.mounts.end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown fin id " + to_string(id));
    }
    return it->second;
}

/// Sum of cycle-averaged fin forces and their yaw moments. Z is always zero.
inline Wrench fin_wrench(const std::vector<FinState>& fins, const FinParams& params) {
    Wrench out;
    for (const FinState& fin : fins) {
        const FinMount& m = mount_of(fin.id, params);
        validate(fin, params);
        const double thrust = fin_thrust(fin, params);
        const double a = thrust_direction(fin);
        const double fx = thrust * std::cos(a);
        const double fy = thrust * std::sin(a);
        out.X += fx;
        out.Y += fy;
        out.N += m.x * fy - m.y * fx;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pulsed jet
// ---------------------------------------------------------------------------

struct JetParams {
    double capacity = 5.0;          ///< mantle capacity [L]
    double elastic_constant = 20.0; ///< k_p [kPa / L]
    double discharge_coeff = 0.25;  ///< c_d [L/s / sqrt(kPa)]
    double thrust_factor = 1.0;     ///< [N / (L/s)^2]
    double pump_max = 0.5;          ///< [L/s]
    FinMount nozzle{-0.1, 0.0};
};

struct JetState {
    double stored_volume = 0.0; ///< [L]
    double pressure = 0.0;      ///< gauge [kPa]
    bool valve_open = false;
    double nozzle_angle = 0.0; ///< thrust direction in the body plane [rad]
    double pump_rate = 0.0;    ///< [L/s]
    double pumped_total = 0.0;   ///< cumulative [L]
    double expelled_total = 0.0; ///< cumulative [L]
};

struct JetStepResult {
    JetState state;
    Wrench wrench; ///< step-averaged
};

/// One step of the mantle charge/vent cycle.
///
/// Closed valve: the pump charges the mantle, no thrust. Open valve: the
/// pump is idle and the mantle vents through the nozzle with outflow
/// Q = c_d sqrt(p), p = k_p V. The vent ODE dV/dt = -c_d sqrt(k_p V) is solved
/// in closed form across the step, and the returned thrust rho Q^2 is the
/// exact step average, so the impulse does not depend on dt.
inline JetStepResult jet_step(const JetState& jet, double pump_cmd, bool valve_cmd,
                              double nozzle_angle, const JetParams& params, double dt) {
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::OutOfRange, "jet_step: dt must be > 0");
    }
    JetStepResult out;
    out.state = jet;
    JetState& s = out.state;
    s.valve_open = valve_cmd;
    s.nozzle_angle = std::isfinite(nozzle_angle) ? std::clamp(nozzle_angle, -kPi, kPi) : 0.0;
    const double pump = std::isfinite(pump_cmd) ? std::clamp(pump_cmd, 0.0, params.pump_max) : 0.0;

    if (!valve_cmd) {
        const double before = s.stored_volume;
        s.stored_volume = std::min(params.capacity, before + pump * dt);
        s.pumped_total += s.stored_volume - before;
        s.pump_rate = pump;
    } else {
        s.pump_rate = 0.0;
        const double a = params.discharge_coeff * std::sqrt(params.elastic_constant);
        const double root0 = std::sqrt(std::max(0.0, s.stored_volume));
        const double root1 = std::max(0.0, root0 - 0.5 * a * dt);
        const double t_empty = std::min(dt, 2.0 * root0 / a);
        // integral of V dt over the active part of the step
        const double volume_time =
            t_empty > 0.0 ? (root0 * root0 * root0 - root1 * root1 * root1) / (1.5 * a) : 0.0;
        const double v1 = root1 * root1;
        s.expelled_total += s.stored_volume - v1;
        s.stored_volume = v1;
        const double thrust = params.thrust_factor * a * a * volume_time / dt;
        const double fx = thrust * std::cos(s.nozzle_angle);
        const double fy = thrust * std::sin(s.nozzle_angle);
        out.wrench.X = fx;
        out.wrench.Y = fy;
        out.wrench.N = params.nozzle.x * fy - params.nozzle.y * fx;
    }
    s.pressure = params.elastic_constant * s.stored_volume;
    return out;
}

// ---------------------------------------------------------------------------
// Control allocation
// ---------------------------------------------------------------------------

struct AllocationResult {
    std::vector<FinState> commands;
    Wrench achieved;
    bool saturated = false;
    double scale = 1.0; ///< fraction of the request that was achieved
};

namespace detail {

using MatB = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using VecF = Eigen::VectorXd;

inline MatB effectiveness(const std::vector<FinState>& fins, const FinParams& params) {
    MatB b(3, 2 * fins.size());
    for (std::size_t i = 0; i < fins.size(); ++i) {
        const FinMount& m = mount_of(fins[i].id, params);
        b.col(2 * i) << 1.0, 0.0, -m.y;
        b.col(2 * i + 1) << 0.0, 1.0, m.x;
    }
    return b;
}

inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = sv.size() > 0 ? 1e-10 * sv(0) : 0.0;
    Eigen::VectorXd inv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        inv(i) = sv(i) > tol ? 1.0 / sv(i) : 0.0;
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Per-fin projection onto the half-disk {side * Fy >= 0, |F| <= tmax}.
inline void project(VecF& f, const std::vector<double>& side, const std::vector<double>& tmax) {
    for (std::size_t i = 0; i < side.size(); ++i) {
        double& fx = f(2 * i);
        double& fy = f(2 * i + 1);
        if (side[i] * fy < 0.0) fy = 0.0;
        const double n = std::hypot(fx, fy);
        if (n > tmax[i]) {
            fx *= tmax[i] / n;
            fy *= tmax[i] / n;
        }
    }
}

/// Minimum-norm f with B f = tau and every fin force on its own side.
/// Exhausts the active sets of the half-plane constraints.
inline std::optional<VecF> min_norm_sided(const MatB& b, const Eigen::Vector3d& tau,
                                          const std::vector<double>& side) {
    const std::size_t n = side.size();
    std::optional<VecF> best;
    double best_norm = std::numeric_limits<double>::infinity();
    const double tol = 1e-10 * (1.0 + tau.norm());
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::vector<Eigen::Index> cols;
        for (std::size_t i = 0; i < n; ++i) {
            cols.push_back(static_cast<Eigen::Index>(2 * i));
            if (!(mask & (std::size_t{1} << i))) cols.push_back(static_cast<Eigen::Index>(2 * i + 1));
        }
        Eigen::MatrixXd sub(3, cols.size());
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(k) = b.col(cols[k]);
        const Eigen::VectorXd x = pinv(sub) * tau;
        if ((sub * x - tau).norm() > tol) continue;
        VecF f = VecF::Zero(2 * n);
        for (std::size_t k = 0; k < cols.size(); ++k) f(cols[k]) = x(k);
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) ok = side[i] * f(2 * i + 1) >= -tol;
        if (!ok) continue;
        for (std::size_t i = 0; i < n; ++i) {
            if (side[i] * f(2 * i + 1) < 0.0) f(2 * i + 1) = 0.0;
        }
        const double nrm = f.squaredNorm();
        if (nrm < best_norm) {
            best_norm = nrm;
            best = f;
        }
    }
    return best;
}

/// Accelerated projected gradient on 1/2 |B f - tau|^2 over the half-disks.
/// Returns the final iterate; the caller checks the residual.
inline VecF projected_lsq(const MatB& b, const Eigen::Vector3d& tau, VecF f,
                          const std::vector<double>& side, const std::vector<double>& tmax,
                          int max_iter, double tol) {
    const Eigen::MatrixXd btb = b.transpose() * b;
    const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(btb).eigenvalues().maxCoeff();
    const double step = 1.0 / lip;
    project(f, side, tmax);
    VecF y = f;
    double t = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        VecF next = y - step * (b.transpose() * (b * y - tau));
        project(next, side, tmax);
        if ((b * next - tau).norm() <= tol) {
            return next;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / t_next) * (next - f);
        f = std::move(next);
        t = t_next;
    }
    return f;
}

} // namespace detail

/// Distribute a planar wrench request over the fins.
///
/// Each fin contributes a body-plane force confined to a half-disk (its
/// 180 degree swivel range times its thrust limit), so the effectiveness
/// matrix is linear in Cartesian fin forces. The minimum-norm solution of
/// that linear map (pseudo-inverse, with the side constraints resolved by
/// active-set enumeration) is used when it respects the thrust limits;
/// otherwise a projected least-squares refinement searches the feasible set.
/// Unreachable requests are scaled back along their own direction until they
/// become attainable, and `saturated` is set. Only tau.X, tau.Y, tau.N are
/// allocated; fins never produce heave force.
inline AllocationResult allocate(const Wrench& tau_desired, const std::vector<FinState>& fins,
                                 const FinParams& params) {
    if (fins.size() < 4) {
        throw Error(ErrorCode::InvalidArgument, "allocate: at least 4 fins required");
    }
    require_finite({tau_desired.X, tau_desired.Y, tau_desired.N}, "allocate wrench");
    validate(params);

    const std::size_t n = fins.size();
    std::vector<double> side(n), tmax(n);
    for (std::size_t i = 0; i < n; ++i) {
        side[i] = fin_side(fins[i].id);
        tmax[i] = params.max_thrust(fins[i].mode);
    }
    const detail::MatB b = detail::effectiveness(fins, params);
    const Eigen::Vector3d tau(tau_desired.X, tau_desired.Y, tau_desired.N);
    const double tol = 1e-9 * (1.0 + tau.norm());

    auto within_limits = [&](const detail::VecF& f) {
        for (std::size_t i = 0; i < n; ++i) {
            if (std::hypot(f(2 * i), f(2 * i + 1)) > tmax[i] * (1.0 + 1e-12)) return false;
        }
        return true;
    };

    detail::VecF force;
    double scale = 1.0;
    bool saturated = false;

    const auto min_norm = detail::min_norm_sided(b, tau, side);
    if (min_norm && within_limits(*min_norm)) {
        force = *min_norm;
    } else {
        detail::VecF start = min_norm ? *min_norm : detail::VecF::Zero(2 * n);
        detail::VecF refined = detail::projected_lsq(b, tau, start, side, tmax, 20000, tol);
        if ((b * refined - tau).norm() <= tol) {
            force = refined;
        } else {
            saturated = true;
            // The min-norm solution scales linearly with the request, which
            // gives a feasible lower bound; bisection tightens it.
            double lo = 0.0;
            detail::VecF best = detail::VecF::Zero(2 * n);
            if (min_norm) {
                double s = 1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double mag = std::hypot((*min_norm)(2 * i), (*min_norm)(2 * i + 1));
                    if (mag > 0.0) s = std::min(s, tmax[i] / mag);
                }
                lo = s;
                best = s * *min_norm;
                detail::project(best, side, tmax);
            }
            double hi = 1.0;
            for (int k = 0; k < 30 && hi - lo > 1e-6; ++k) {
                const double mid = 0.5 * (lo + hi);
                const Eigen::Vector3d target = mid * tau;
                const double tol_mid = 1e-9 * (1.0 + target.norm());
                detail::VecF cand = detail::projected_lsq(b, target, best * (mid / std::max(lo, 1e-12)),
                                                          side, tmax, 3000, tol_mid);
                if ((b * cand - target).norm() <= tol_mid) {
                    lo = mid;
                    best = cand;
                } else {
                    hi = mid;
                }
            }
            scale = lo;
            force = best;
        }
    }

    AllocationResult out;
    out.saturated = saturated;
    out.scale = scale;
    out.commands.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        FinState cmd = fins[i];
        const double fx = force(2 * i);
        const double fy = force(2 * i + 1);
        const double mag = std::min(std::hypot(fx, fy), tmax[i]);
        if (mag > 0.0) {
            const double along = std::atan2(std::max(0.0, side[i] * fy), fx); // [0, pi]
            cmd.swivel = std::clamp(along - kPi / 2.0, -kPi / 2.0, kPi / 2.0);
            cmd.amplitude = params.amplitude_max;
            cmd.frequency = std::sqrt(mag / (params.thrust_coeff * params.mode_factor(cmd.mode) *
                                             params.amplitude_max * params.amplitude_max));
            cmd.frequency = std::min(cmd.frequency, params.frequency_max);
        } else {
            cmd.amplitude = 0.0;
            cmd.frequency = 0.0;
        }
        out.commands.push_back(cmd);
    }
    out.achieved = fin_wrench(out.commands, params);
    return out;
}

} // namespace ursula::propulsion
