#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gridcap/netmodel.hpp"

namespace gridcap {

/// Normalized residential daily demand, 15-minute resolution, peak 1.0.
inline constexpr std::array<double, 96> kDailyDemandCurve{
    0.350, 0.340, 0.328, 0.316, 0.306, 0.297, 0.291, 0.286, 0.283, 0.282, 0.281, 0.280,
    0.280, 0.281, 0.281, 0.282, 0.284, 0.288, 0.294, 0.303, 0.317, 0.335, 0.360, 0.391,
    0.427, 0.467, 0.508, 0.546, 0.577, 0.599, 0.608, 0.604, 0.587, 0.562, 0.530, 0.497,
    0.465, 0.438, 0.418, 0.405, 0.399, 0.399, 0.403, 0.411, 0.420, 0.430, 0.440, 0.448,
    0.455, 0.459, 0.460, 0.459, 0.455, 0.449, 0.441, 0.432, 0.422, 0.413, 0.404, 0.398,
    0.394, 0.394, 0.399, 0.410, 0.427, 0.452, 0.484, 0.523, 0.569, 0.620, 0.676, 0.734,
    0.793, 0.848, 0.899, 0.941, 0.973, 0.993, 1.000, 0.993, 0.973, 0.940, 0.898, 0.847,
    0.792, 0.735, 0.679, 0.627, 0.580, 0.541, 0.508, 0.481, 0.459, 0.440, 0.421, 0.402};

namespace feeder_detail {

/// Uniform [0, 1) from the raw 64-bit engine output (portable across standard libraries).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Kron-reduced phase matrix from positive- and zero-sequence values.
inline Matrix3 phase_matrix(double z1, double z0) {
  const double self = (z0 + 2.0 * z1) / 3.0;
  const double mutual = (z0 - z1) / 3.0;
  Matrix3 m;
  m << self, mutual, mutual, mutual, self, mutual, mutual, mutual, self;
  return m;
}

struct CableType {
  double r1, x1, r0, x0;  // ohm/km
  double ampacity_a;
};

inline NetworkData::Line line(const std::string& from, const std::string& to, const CableType& c,
                              double length_km) {
  NetworkData::Line l;
  l.from = from;
  l.to = to;
  l.r_ohm_per_km = phase_matrix(c.r1, c.r0);
  l.x_ohm_per_km = phase_matrix(c.x1, c.x0);
  l.length_km = length_km;
  l.ampacity_a = c.ampacity_a;
  return l;
}

}  // namespace feeder_detail

/// Residential subnetwork of the CIGRE LV benchmark: 18 nodes (R1 is the
/// transformer secondary and slack), 17 cables, end users at R11, R15, R16,
/// R17 and R18. Each user's load is split over the phases with seeded weights.
inline std::pair<NetworkModel, LoadProfile> build_cigre_lv(std::uint64_t seed) {
  using namespace feeder_detail;
  // Main feeder and service cables. Zero-sequence values model the 4-wire return.
  constexpr CableType kMain{0.162, 0.0832, 0.486, 0.2496, 450.0};
  constexpr CableType kService{0.822, 0.0847, 2.466, 0.2541, 300.0};

  NetworkData data;
  for (int i = 1; i <= 18; ++i) data.nodes.push_back("R" + std::to_string(i));
  data.slack = "R1";
  for (int i = 1; i < 10; ++i)
    data.lines.push_back(line("R" + std::to_string(i), "R" + std::to_string(i + 1), kMain, 0.035));
  data.lines.push_back(line("R3", "R11", kService, 0.030));
  data.lines.push_back(line("R4", "R12", kService, 0.035));
  data.lines.push_back(line("R12", "R13", kService, 0.035));
  data.lines.push_back(line("R13", "R14", kService, 0.035));
  data.lines.push_back(line("R14", "R15", kService, 0.030));
  data.lines.push_back(line("R6", "R16", kService, 0.030));
  data.lines.push_back(line("R9", "R17", kService, 0.030));
  data.lines.push_back(line("R10", "R18", kService, 0.030));
  data.bases = Bases{400.0, 1.0e6};

  struct User {
    const char* node;
    double kva;
  };
  constexpr std::array<User, 5> kUsers{{{"R11", 15.0}, {"R15", 52.0}, {"R16", 55.0}, {"R17", 35.0},
                                        {"R18", 47.0}}};
  for (const auto& u : kUsers) data.der_nodes.emplace_back(u.node);

  NetworkModel net(data);
  LoadProfile profile(net.node_count(), kDailyDemandCurve.size(), 15);
  constexpr double kPowerFactor = 0.95;
  constexpr double kCoincidence = 0.7;
  const double tan_phi = std::tan(std::acos(kPowerFactor));
  std::mt19937_64 rng(seed);
  for (const auto& u : kUsers) {
    std::array<double, 3> w{};
    double total = 0.0;
    for (auto& v : w) total += (v = uniform(rng, 0.4, 1.0));
    const NodeId n = net.index_of(u.node);
    for (Phase ph : kPhases) {
      const double peak_kw = kCoincidence * u.kva * kPowerFactor * w[index(ph)] / total;
      for (std::size_t t = 0; t < kDailyDemandCurve.size(); ++t) {
        const double kw = peak_kw * kDailyDemandCurve[t];
        profile.p(n, ph, t) = net.bases().kw_to_pu(kw);
        profile.q(n, ph, t) = net.bases().kw_to_pu(kw * tan_phi);
      }
    }
  }
  return {std::move(net), std::move(profile)};
}

/// Seeded 64-node, 63-cable radial LV feeder with 43 three-phase end users.
///
/// Twenty junction nodes form the backbone; users hang off junctions or off
/// neighbouring users. Profiles combine a base load with a randomly placed
/// morning and evening activity per phase, giving an evening-peaked aggregate.
inline std::pair<NetworkModel, LoadProfile> build_synthetic_feeder(std::uint64_t seed) {
  using namespace feeder_detail;
  constexpr CableType kTrunk{0.206, 0.080, 0.824, 0.320, 275.0};
  constexpr CableType kService{0.443, 0.086, 1.772, 0.344, 200.0};
  constexpr int kJunctions = 20;
  constexpr int kUsers = 43;

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  NetworkData data;
  data.nodes.push_back("N0");
  data.slack = "N0";
  auto name = [](int i) { return "N" + std::to_string(i); };

  // Backbone: mostly chained, occasionally branching from an earlier junction.
  for (int j = 1; j <= kJunctions; ++j) {
    data.nodes.push_back(name(j));
    int parent = j - 1;
    if (j > 2 && uniform01(rng) < 0.3) parent = 1 + static_cast<int>(uniform01(rng) * (j - 2));
    data.lines.push_back(line(name(parent), name(j), kTrunk, uniform(rng, 0.030, 0.055)));
  }
  for (int u = 0; u < kUsers; ++u) {
    const int id = kJunctions + 1 + u;
    data.nodes.push_back(name(id));
    int parent = 1 + static_cast<int>(uniform01(rng) * kJunctions);
    if (u > 0 && uniform01(rng) < 0.2) parent = kJunctions + 1 + static_cast<int>(uniform01(rng) * u);
    data.lines.push_back(line(name(parent), name(id), kService, uniform(rng, 0.010, 0.035)));
    data.der_nodes.push_back(name(id));
  }
  data.bases = Bases{400.0, 1.0e6};
  NetworkModel net(data);

  constexpr std::size_t kPeriods = 96;
  LoadProfile profile(net.node_count(), kPeriods, 15);
  auto bump = [](double t, double centre, double width) {
    double d = std::abs(t - centre);
    d = std::min(d, 24.0 - d);
    return std::exp(-0.5 * (d / width) * (d / width));
  };
  for (int u = 0; u < kUsers; ++u) {
    const NodeId n = net.index_of(name(kJunctions + 1 + u));
    const double pf = uniform(rng, 0.93, 0.99);
    const double tan_phi = std::tan(std::acos(pf));
    for (Phase ph : kPhases) {
      const double base_kw = uniform(rng, 0.1, 0.3);
      const double morning_kw = uniform(rng, 0.3, 1.2);
      const double morning_at = uniform(rng, 6.0, 9.0);
      const double evening_kw = uniform(rng, 1.0, 3.0);
      const double evening_at = uniform(rng, 17.0, 22.5);
      const double evening_width = uniform(rng, 0.4, 1.2);
      for (std::size_t t = 0; t < kPeriods; ++t) {
        const double hour = (static_cast<double>(t) + 0.5) / 4.0;
        const double kw = base_kw + morning_kw * bump(hour, morning_at, 0.6) +
                          evening_kw * bump(hour, evening_at, evening_width);
        profile.p(n, ph, t) = net.bases().kw_to_pu(kw);
        profile.q(n, ph, t) = net.bases().kw_to_pu(kw * tan_phi);
      }
    }
  }
  return {std::move(net), std::move(profile)};
}

}  // namespace gridcap
