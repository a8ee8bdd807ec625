#pragma once

// Small directed-graph helpers shared by the analyses.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "itrs/term.hpp"

namespace itrs::detail {

using Adjacency = std::vector<std::vector<std::uint32_t>>;

struct Components {
  std::vector<std::int64_t> id;                    // per vertex
  std::vector<std::vector<std::uint32_t>> members;  // sinks first
  std::vector<bool> cyclic;                         // nontrivial or self-loop
};

inline Components strongly_connected(const Adjacency& adj) {
  const std::size_t n = adj.size();
  Components out;
  out.id.assign(n, -1);
  std::vector<std::int64_t> index(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::uint32_t> stack;
  std::vector<std::pair<std::uint32_t, std::size_t>> call;
  std::int64_t counter = 0;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (index[s] >= 0) continue;
    index[s] = low[s] = counter++;
    stack.push_back(s);
    on_stack[s] = 1;
    call.push_back({s, 0});
    while (!call.empty()) {
      auto& [v, i] = call.back();
      if (i < adj[v].size()) {
        auto w = adj[v][i++];
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      auto done = v;
      if (low[done] == index[done]) {
        std::vector<std::uint32_t> members;
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          out.id[w] = static_cast<std::int64_t>(out.members.size());
          members.push_back(w);
        } while (w != done);
        bool self = std::find(adj[done].begin(), adj[done].end(), done) != adj[done].end();
        out.cyclic.push_back(members.size() > 1 || self);
        out.members.push_back(std::move(members));
      }
      call.pop_back();
      if (!call.empty()) {
        auto parent = call.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return out;
}

inline Adjacency term_adjacency(const Term& t) {
  Adjacency adj(t.size());
  for (std::uint32_t i = 0; i < t.size(); ++i) {
    adj[i].assign(t.node(i).kids.begin(), t.node(i).kids.end());
  }
  return adj;
}

/// Shortest position from the root to every node (breadth-first).
inline std::vector<std::optional<Position>> shortest_positions(const Term& t) {
  std::vector<std::optional<Position>> out(t.size());
  out[0] = Position{};
  std::deque<std::uint32_t> queue{0};
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    const auto& kids = t.node(v).kids;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      if (!out[kids[i]]) {
        out[kids[i]] = out[v]->child(static_cast<std::uint32_t>(i + 1));
        queue.push_back(kids[i]);
      }
    }
  }
  return out;
}

}  // namespace itrs::detail
