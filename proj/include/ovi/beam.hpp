#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ovi/common.hpp"
#include "ovi/io.hpp"
#include "ovi/traffic.hpp"

namespace ovi::beam {

struct BeamSegment {
  double span_m;
  double elastic_modulus_pa;
  double inertia_m4;
  double density_kg_m3;
  double area_m2;
};

enum class SupportKind { kPinned, kSpring };

struct Support {
  double pos_m;
  SupportKind kind;
  double stiffness_n_per_m = 0.0;  // springs only
};

struct BeamModel {
  double length_m = 0.0;
  std::vector<BeamSegment> segments;
  std::vector<Support> supports;
  int n_elements = 64;

  void validate() const {
    require(length_m > 0.0, "beam length must be positive");
    require(!segments.empty(), "beam needs at least one segment");
    require(supports.size() >= 2, "beam needs at least two supports");
    require(n_elements >= 2, "mesh needs at least two elements");
    double total = 0.0;
    for (const auto& s : segments) {
      require(s.span_m > 0.0, "segment span must be positive");
      require(s.elastic_modulus_pa * s.inertia_m4 > 0.0,
              "segment EI must be positive");
      total += s.span_m;
    }
    require(std::abs(total - length_m) <= 1e-9 * length_m,
            "segment spans must sum to the beam length");
    for (const auto& s : supports) {
      require(s.pos_m >= 0.0 && s.pos_m <= length_m,
              "support position outside the span");
      if (s.kind == SupportKind::kSpring) {
        require(s.stiffness_n_per_m > 0.0, "spring stiffness must be positive");
      }
    }
  }
};

// Uniform single-segment beam pinned at both ends.
inline BeamModel make_simply_supported(double length_m, double e_pa,
                                       double inertia_m4, double density,
                                       double area_m2, int n_elements) {
  BeamModel m;
  m.length_m = length_m;
  m.segments = {{length_m, e_pa, inertia_m4, density, area_m2}};
  m.supports = {{0.0, SupportKind::kPinned},
                {length_m, SupportKind::kPinned}};
  m.n_elements = n_elements;
  return m;
}

struct SensorLayout {
  std::vector<double> positions_m;
};

// Sensors sit at the midpoints of equal-length sections tiling the bridge
// (the last section may be shorter).
inline SensorLayout sensors_for_sections(double bridge_length_m,
                                         double section_length_m) {
  require(section_length_m > 0.0 && section_length_m <= bridge_length_m,
          "bad section length");
  SensorLayout layout;
  for (double lo = 0.0; lo < bridge_length_m - 1e-9; lo += section_length_m) {
    const double hi = std::min(lo + section_length_m, bridge_length_m);
    layout.positions_m.push_back(0.5 * (lo + hi));
  }
  return layout;
}

// T x n vertical displacement series, downward negative.
struct ResponseMatrix {
  std::size_t n_sensors = 0;
  double dt_s = 0.0;
  std::vector<double> sensor_positions_m;
  std::vector<double> values;  // row-major T x n

  std::size_t n_rows() const {
    return n_sensors == 0 ? 0 : values.size() / n_sensors;
  }
  double at(std::size_t t, std::size_t s) const {
    return values[t * n_sensors + s];
  }
  double& at(std::size_t t, std::size_t s) { return values[t * n_sensors + s]; }
};

// ---------------------------------------------------------------------------
// Closed-form simply supported beam under a point load
// ---------------------------------------------------------------------------

// Vertical displacement at sensor_pos due to a downward point load P at
// load_pos on a simply supported prismatic beam. Downward negative.
inline double ss_influence(double load_pos, double sensor_pos, double p_newton,
                           double length, double ei) {
  require(load_pos >= 0.0 && load_pos <= length, "load position off the span");
  require(sensor_pos >= 0.0 && sensor_pos <= length,
          "sensor position off the span");
  require(ei > 0.0, "EI must be positive");
  const double a = load_pos;
  const double b = length - a;
  const double x = sensor_pos;
  double defl;
  if (x <= a) {
    defl = p_newton * b * x * (length * length - b * b - x * x) /
           (6.0 * length * ei);
  } else {
    const double xr = length - x;  // mirrored coordinate
    defl = p_newton * a * xr * (length * length - a * a - xr * xr) /
           (6.0 * length * ei);
  }
  return -defl;
}

// ---------------------------------------------------------------------------
// Static Euler-Bernoulli finite element solver (Hermite cubic elements,
// 2 DOF per node: deflection and rotation)
// ---------------------------------------------------------------------------

struct PointForce {
  double pos_m;
  double p_newton;  // downward positive
};

class StaticBeamSolver {
 public:
  explicit StaticBeamSolver(const BeamModel& model) : model_(model) {
    model.validate();
    n_nodes_ = model.n_elements + 1;
    h_ = model.length_m / model.n_elements;
    const int n_dof = 2 * n_nodes_;

    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n_dof, n_dof);
    std::vector<double> seg_end;
    double acc = 0.0;
    for (const auto& s : model.segments) {
      acc += s.span_m;
      seg_end.push_back(acc);
    }
    for (int e = 0; e < model.n_elements; ++e) {
      const double mid = (e + 0.5) * h_;
      std::size_t seg = 0;
      while (seg + 1 < seg_end.size() && mid > seg_end[seg]) ++seg;
      const double ei = model.segments[seg].elastic_modulus_pa *
                        model.segments[seg].inertia_m4;
      const double c = ei / (h_ * h_ * h_);
      const double h = h_;
      const double ke[4][4] = {
          {12 * c, 6 * c * h, -12 * c, 6 * c * h},
          {6 * c * h, 4 * c * h * h, -6 * c * h, 2 * c * h * h},
          {-12 * c, -6 * c * h, 12 * c, -6 * c * h},
          {6 * c * h, 2 * c * h * h, -6 * c * h, 4 * c * h * h}};
      const int dof[4] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3};
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) k(dof[i], dof[j]) += ke[i][j];
      }
    }

    std::vector<bool> fixed(static_cast<std::size_t>(n_dof), false);
    for (const auto& s : model.supports) {
      const int node = nearest_node(s.pos_m);
      if (s.kind == SupportKind::kPinned) {
        fixed[static_cast<std::size_t>(2 * node)] = true;
      } else {
        k(2 * node, 2 * node) += s.stiffness_n_per_m;
      }
    }

    free_dofs_.reserve(static_cast<std::size_t>(n_dof));
    for (int d = 0; d < n_dof; ++d) {
      if (!fixed[static_cast<std::size_t>(d)]) free_dofs_.push_back(d);
    }
    const auto nf = static_cast<Eigen::Index>(free_dofs_.size());
    Eigen::MatrixXd kff(nf, nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
      for (Eigen::Index j = 0; j < nf; ++j) {
        kff(i, j) = k(free_dofs_[static_cast<std::size_t>(i)],
                      free_dofs_[static_cast<std::size_t>(j)]);
      }
    }
    ldlt_.compute(kff);
    const auto d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    if (ldlt_.info() != Eigen::Success || !(dmax > 0.0) ||
        d.minCoeff() <= 1e-12 * dmax) {
      throw NumericError(
          "singular stiffness matrix: the beam is a mechanism "
          "(insufficient supports?)");
    }
  }

  int n_nodes() const { return n_nodes_; }
  double node_pos(int i) const { return i * h_; }

  // Full DOF vector (w, theta per node); constrained entries are zero.
  Eigen::VectorXd solve(const std::vector<PointForce>& loads) const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * n_nodes_);
    for (const auto& load : loads) {
      require(load.pos_m >= -1e-9 && load.pos_m <= model_.length_m + 1e-9,
              "load position off the span");
      int e = static_cast<int>(load.pos_m / h_);
      e = std::clamp(e, 0, model_.n_elements - 1);
      const double xi = (load.pos_m - e * h_) / h_;
      const double xi2 = xi * xi, xi3 = xi2 * xi;
      // Consistent nodal forces from Hermite shape functions; downward load
      // enters as negative transverse force (upward-positive convention).
      const double n1 = 1.0 - 3.0 * xi2 + 2.0 * xi3;
      const double n2 = h_ * (xi - 2.0 * xi2 + xi3);
      const double n3 = 3.0 * xi2 - 2.0 * xi3;
      const double n4 = h_ * (xi3 - xi2);
      f(2 * e) += -load.p_newton * n1;
      f(2 * e + 1) += -load.p_newton * n2;
      f(2 * e + 2) += -load.p_newton * n3;
      f(2 * e + 3) += -load.p_newton * n4;
    }

    Eigen::VectorXd ff(static_cast<Eigen::Index>(free_dofs_.size()));
    for (Eigen::Index i = 0; i < ff.size(); ++i) {
      ff(i) = f(free_dofs_[static_cast<std::size_t>(i)]);
    }
    const Eigen::VectorXd uf = ldlt_.solve(ff);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(2 * n_nodes_);
    for (Eigen::Index i = 0; i < uf.size(); ++i) {
      u(free_dofs_[static_cast<std::size_t>(i)]) = uf(i);
    }
    return u;
  }

  // Hermite interpolation of the deflection field.
  double deflection_at(const Eigen::VectorXd& u, double x) const {
    require(x >= -1e-9 && x <= model_.length_m + 1e-9,
            "evaluation point off the span");
    int e = static_cast<int>(x / h_);
    e = std::clamp(e, 0, model_.n_elements - 1);
    const double xi = (x - e * h_) / h_;
    const double xi2 = xi * xi, xi3 = xi2 * xi;
    const double n1 = 1.0 - 3.0 * xi2 + 2.0 * xi3;
    const double n2 = h_ * (xi - 2.0 * xi2 + xi3);
    const double n3 = 3.0 * xi2 - 2.0 * xi3;
    const double n4 = h_ * (xi3 - xi2);
    return n1 * u(2 * e) + n2 * u(2 * e + 1) + n3 * u(2 * e + 2) +
           n4 * u(2 * e + 3);
  }

 private:
  int nearest_node(double pos) const {
    const int node = static_cast<int>(std::lround(pos / h_));
    require(node >= 0 && node < n_nodes_ &&
                std::abs(node * h_ - pos) <= 1e-6 * std::max(model_.length_m, 1.0),
            "support must coincide with a mesh node");
    return node;
  }

  BeamModel model_;
  int n_nodes_ = 0;
  double h_ = 0.0;
  std::vector<int> free_dofs_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
};

// One-shot static solve; returns the full nodal DOF vector.
inline Eigen::VectorXd fe_static_solve(const BeamModel& model,
                                       const std::vector<PointForce>& loads) {
  return StaticBeamSolver(model).solve(loads);
}

// ---------------------------------------------------------------------------
// Response synthesis
// ---------------------------------------------------------------------------

enum class ResponseBackend { kClosedFormSS, kFiniteElement };

inline const char* to_string(ResponseBackend b) {
  return b == ResponseBackend::kClosedFormSS ? "closed-form-ss"
                                             : "finite-element";
}

// Quasi-static response: at each sampling instant the vehicles on the span
// act as concentrated forces weight * g, and superposed static deflections
// are read at the sensor positions.
inline ResponseMatrix synthesize_response(const traffic::TrafficTrajectory& traj,
                                          const BeamModel& model,
                                          const SensorLayout& sensors,
                                          double sample_dt_s,
                                          std::size_t n_instants,
                                          ResponseBackend backend) {
  model.validate();
  require(!sensors.positions_m.empty(), "no sensors");
  require(n_instants >= 1, "need at least one sampling instant");
  require(sample_dt_s > 0.0, "sampling step must be positive");
  require(std::abs(traj.bridge_length_m() - model.length_m) <=
              1e-9 * model.length_m,
          "trajectory grid length does not match the bridge length");
  const double ratio = traj.tick_duration_s / sample_dt_s;
  require(std::abs(ratio - std::round(ratio)) <= 1e-9 && ratio >= 1.0 - 1e-9,
          "tick duration must be an integer multiple of the sampling step");
  for (double s : sensors.positions_m) {
    require(s >= 0.0 && s <= model.length_m, "sensor off the span");
  }

  const std::size_t n = sensors.positions_m.size();
  ResponseMatrix resp;
  resp.n_sensors = n;
  resp.dt_s = sample_dt_s;
  resp.sensor_positions_m = sensors.positions_m;
  resp.values.assign(n_instants * n, 0.0);

  double ei = 0.0;
  std::unique_ptr<StaticBeamSolver> solver;
  if (backend == ResponseBackend::kClosedFormSS) {
    require(model.segments.size() == 1 && model.supports.size() == 2 &&
                model.supports[0].kind == SupportKind::kPinned &&
                model.supports[1].kind == SupportKind::kPinned &&
                std::abs(model.supports[0].pos_m) <= 1e-9 &&
                std::abs(model.supports[1].pos_m - model.length_m) <= 1e-9,
            "closed-form backend needs a prismatic beam pinned at both ends");
    ei = model.segments[0].elastic_modulus_pa * model.segments[0].inertia_m4;
  } else {
    solver = std::make_unique<StaticBeamSolver>(model);
  }

  for (std::size_t j = 0; j < n_instants; ++j) {
    const double t = static_cast<double>(j) * sample_dt_s;
    const auto loads = traffic::loads_at(traj, t);
    if (loads.empty()) continue;
    if (backend == ResponseBackend::kClosedFormSS) {
      for (std::size_t s = 0; s < n; ++s) {
        double w = 0.0;
        for (const auto& load : loads) {
          w += ss_influence(load.pos_m, sensors.positions_m[s],
                            load.weight_kg * kGravity, model.length_m, ei);
        }
        resp.at(j, s) = w;
      }
    } else {
      std::vector<PointForce> forces;
      forces.reserve(loads.size());
      for (const auto& load : loads) {
        forces.push_back({load.pos_m, load.weight_kg * kGravity});
      }
      const Eigen::VectorXd u = solver->solve(forces);
      for (std::size_t s = 0; s < n; ++s) {
        resp.at(j, s) = solver->deflection_at(u, sensors.positions_m[s]);
      }
    }
  }
  ensure_finite(resp.values, "synthesized response");
  return resp;
}

// ---------------------------------------------------------------------------
// Export / import
// ---------------------------------------------------------------------------

inline std::string response_to_csv(const ResponseMatrix& resp,
                                   const std::string& config_digest = {}) {
  std::string out;
  out.reserve(resp.values.size() * 20);
  if (!config_digest.empty()) {
    out += "# config_digest=" + config_digest + "\n";
  }
  out += "t_seconds";
  for (std::size_t s = 0; s < resp.n_sensors; ++s) {
    out += ",sensor_" + std::to_string(s);
  }
  out += '\n';
  for (std::size_t t = 0; t < resp.n_rows(); ++t) {
    out += format_double(static_cast<double>(t) * resp.dt_s);
    for (std::size_t s = 0; s < resp.n_sensors; ++s) {
      out += ',';
      out += format_double(resp.at(t, s));
    }
    out += '\n';
  }
  return out;
}

inline ResponseMatrix response_from_csv(const std::string& csv, double dt_s,
                                        std::vector<double> sensor_positions) {
  ResponseMatrix resp;
  resp.n_sensors = sensor_positions.size();
  resp.dt_s = dt_s;
  resp.sensor_positions_m = std::move(sensor_positions);
  for_each_csv_row(csv, [&](const std::vector<std::string_view>& cols) {
    if (cols.size() != resp.n_sensors + 1) {
      throw IoError("response row has wrong column count");
    }
    for (std::size_t s = 0; s < resp.n_sensors; ++s) {
      resp.values.push_back(parse_double(cols[s + 1]));
    }
  });
  return resp;
}

}  // namespace ovi::beam
