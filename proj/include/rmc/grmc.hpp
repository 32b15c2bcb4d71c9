#pragma once

// Graph-structured robot manufacturing cell. Nine nodes with one buffer after
// each machine; an action activates a typed edge and moves a ready piece of
// that type from the edge's from-node to its to-node.
//
// Node indices: 0=IB1 1=IB2 2=M1 3=MB1 4=M2 5=MB2 6=M3 7=MB3 8=OB.

#include <sstream>
#include <string>

#include "rmc/cell.hpp"
#include "rmc/srmc.hpp"

namespace rmc {

using GrmcConfig = SrmcConfig;

inline Layout grmc_layout() {
  using S = StationId;
  return Layout("grmc", {S::IB1, S::IB2, S::M1, S::MB1, S::M2, S::MB2, S::M3, S::MB3, S::OB},
                {std::vector<S>{S::IB1, S::M1, S::MB1, S::M2, S::MB2, S::M3, S::MB3, S::OB},
                 std::vector<S>{S::IB2, S::M2, S::MB2, S::M1, S::MB1, S::M3, S::MB3, S::OB}});
}

struct Edge {
  WorkPieceKind kind;
  int from;
  int to;
};

/// Node/edge view of a layout. Edge i corresponds to action i + 1.
struct CellGraph {
  std::vector<StationId> nodes;
  std::vector<Edge> edges;

  explicit CellGraph(const Layout& layout) : nodes(layout.stations()) {
    for (const Move& m : layout.moves()) edges.push_back({m.kind, layout.node_of(m.from), layout.node_of(m.to)});
  }

  /// Plain-text adjacency listing: one line per node with its role and
  /// outgoing typed edges.
  std::string adjacency_listing() const {
    std::ostringstream os;
    os << "# node role station edges(kind:to)\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      os << i << ' ' << role_name(role_of(nodes[i])) << ' ' << station_name(nodes[i]);
      for (const Edge& e : edges)
        if (e.from == static_cast<int>(i)) os << ' ' << kind_name(e.kind) << ':' << e.to;
      os << '\n';
    }
    return os.str();
  }
};

class GrmcEnv : public Cell {
 public:
  explicit GrmcEnv(const GrmcConfig& cfg) : Cell(grmc_layout(), cfg.cell()) {}

  CellGraph graph() const { return CellGraph(layout()); }

  /// Edge activation for both agents; identical contract to Cell::step.
  StepResult activate_edge(const CellState& state, JointAction actions) const { return step(state, actions); }
};

}  // namespace rmc
