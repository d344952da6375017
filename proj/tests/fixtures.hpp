#pragma once

#include <string>
#include <vector>

#include "gridcap/netmodel.hpp"

namespace fixtures {

using gridcap::Matrix3;
using gridcap::NetworkData;

inline Matrix3 coupled(double self, double mutual) {
  Matrix3 m;
  m << self, mutual, mutual, mutual, self, mutual, mutual, mutual, self;
  return m;
}

inline NetworkData::Line line(std::string from, std::string to, const Matrix3& r, const Matrix3& x,
                              double length_km = 0.1, double ampacity_a = 300.0) {
  NetworkData::Line l;
  l.from = std::move(from);
  l.to = std::move(to);
  l.r_ohm_per_km = r;
  l.x_ohm_per_km = x;
  l.length_km = length_km;
  l.ampacity_a = ampacity_a;
  return l;
}

/// Slack S feeding a single node N over one coupled cable.
inline NetworkData two_node(const Matrix3& r, const Matrix3& x, double length_km = 0.1,
                            double ampacity_a = 300.0) {
  NetworkData d;
  d.nodes = {"S", "N"};
  d.slack = "S";
  d.der_nodes = {"N"};
  d.lines.push_back(line("S", "N", r, x, length_km, ampacity_a));
  return d;
}

/// S - J - U1, J - U2: two DER users behind a shared trunk.
inline NetworkData four_node() {
  NetworkData d;
  d.nodes = {"S", "J", "U1", "U2"};
  d.slack = "S";
  d.der_nodes = {"U1", "U2"};
  d.lines.push_back(line("S", "J", coupled(0.25, 0.08), coupled(0.09, 0.03), 0.12, 250.0));
  d.lines.push_back(line("J", "U1", coupled(0.45, 0.12), coupled(0.09, 0.03), 0.08, 180.0));
  d.lines.push_back(line("J", "U2", coupled(0.45, 0.12), coupled(0.09, 0.03), 0.10, 180.0));
  return d;
}

/// Five-node chain with branching, no mutual coupling; every non-slack node is a DER node.
inline NetworkData diagonal_feeder() {
  NetworkData d;
  d.nodes = {"S", "A1", "A2", "A3", "B1"};
  d.slack = "S";
  d.der_nodes = {"A1", "A2", "A3", "B1"};
  const Matrix3 r = coupled(0.3, 0.0);
  const Matrix3 x = coupled(0.08, 0.0);
  d.lines.push_back(line("S", "A1", r, x, 0.10, 300.0));
  d.lines.push_back(line("A1", "A2", r, x, 0.08, 300.0));
  d.lines.push_back(line("A2", "A3", r, x, 0.06, 300.0));
  d.lines.push_back(line("A1", "B1", r, x, 0.07, 300.0));
  return d;
}

}  // namespace fixtures
