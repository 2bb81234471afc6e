/*!
  \file extraction.hpp
  \brief Chooses which combinational subgraphs to evaluate: candidate
         enumeration per registered value, delay- vs. fanout-driven ranking,
         and path -> cone -> window expansion.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "delay_matrix.hpp"
#include "graph.hpp"
#include "sdc.hpp"

namespace isdc
{

/*! \brief Exact fraction; keeps score comparisons free of float drift. */
struct rational
{
  std::int64_t num = 0;
  std::int64_t den = 1;

  double to_double() const { return static_cast<double>( num ) / static_cast<double>( den ); }

  friend bool operator<( rational const& a, rational const& b )
  {
    return a.num * b.den < b.num * a.den;
  }
  friend bool operator==( rational const& a, rational const& b )
  {
    return a.num * b.den == b.num * a.den;
  }
  friend bool operator>( rational const& a, rational const& b ) { return b < a; }
};

/*! \brief A same-stage critical path ending at a registered value. */
struct candidate_path
{
  std::string src;
  std::string dst;
  std::int64_t ccp_delay_ps = 0;
  rational score; /* fanout-driven score, precomputed */
};

enum class subgraph_kind
{
  path,
  cone,
  window
};

inline char const* to_string( subgraph_kind k )
{
  switch ( k )
  {
  case subgraph_kind::path:
    return "path";
  case subgraph_kind::cone:
    return "cone";
  default:
    return "window";
  }
}

/*! \brief Combinational node set sent to the oracle. Node/leaf/root id lists
 *         are kept sorted for deterministic identity.
 */
struct subgraph
{
  subgraph_kind kind = subgraph_kind::cone;
  int id = 0;
  std::vector<std::string> nodes;
  std::vector<std::string> leaves;
  std::vector<std::string> roots;
};

/*! \brief Fanout-aware score: (bits + ccp/T) / (num_users + 1), computed as
 *         an exact fraction (bits * T + ccp) / (T * (users + 1)).
 */
inline rational score_fanout( candidate_path const& c, graph const& g, std::int64_t t_clk )
{
  auto const dst = g.index_of( c.dst );
  std::int64_t const users = static_cast<std::int64_t>( g.uses_of( dst ).size() );
  return rational{ g.at( dst ).bits * t_clk + c.ccp_delay_ps, t_clk * ( users + 1 ) };
}

/*! \brief One candidate per node whose result crosses a stage boundary; the
 *         source is the same-stage node with the largest estimated delay to
 *         it (smallest id on ties).
 */
inline std::vector<candidate_path> enumerate_candidates( graph const& g, schedule const& s, delay_matrix const& m )
{
  std::vector<candidate_path> out;
  for ( std::size_t j = 0; j < g.size(); ++j )
  {
    bool registered = false;
    for ( auto const& use : g.uses_of( j ) )
      registered |= s.stages[use.consumer] > s.stages[j];
    if ( !registered )
      continue;

    std::size_t best = j;
    std::int64_t best_delay = m.at( j, j );
    for ( std::size_t u = 0; u < g.size(); ++u )
    {
      if ( u == j || s.stages[u] != s.stages[j] )
        continue;
      std::int64_t const d = m.at( u, j );
      if ( d == delay_matrix::unconnected )
        continue;
      if ( d > best_delay || ( d == best_delay && g.at( u ).id < g.at( best ).id ) )
      {
        best = u;
        best_delay = d;
      }
    }

    candidate_path c;
    c.src = g.at( best ).id;
    c.dst = g.at( j ).id;
    c.ccp_delay_ps = best_delay;
    c.score = score_fanout( c, g, g.clock_period_ps() );
    out.push_back( std::move( c ) );
  }
  return out;
}

enum class rank_strategy
{
  delay_driven,
  fanout_driven
};

/*! \brief Sorts candidates by the chosen strategy (descending) with (dst,
 *         src) id tie break and returns the top `m_count`.
 */
inline std::vector<candidate_path> rank_and_take( std::vector<candidate_path> cands, rank_strategy strategy, std::size_t m_count )
{
  auto tie = []( candidate_path const& a, candidate_path const& b ) {
    return std::tie( a.dst, a.src ) < std::tie( b.dst, b.src );
  };
  std::sort( cands.begin(), cands.end(), [&]( candidate_path const& a, candidate_path const& b ) {
    if ( strategy == rank_strategy::delay_driven )
    {
      if ( a.ccp_delay_ps != b.ccp_delay_ps )
        return a.ccp_delay_ps > b.ccp_delay_ps;
    }
    else
    {
      if ( !( a.score == b.score ) )
        return a.score > b.score;
    }
    return tie( a, b );
  } );
  if ( cands.size() > m_count )
    cands.resize( m_count );
  return cands;
}

namespace detail
{

/* A node stops the cone DFS when it is a primary input or any operand lives
 * in an earlier stage. This is intrinsic to the node, so leaves of distinct
 * cones in the same stage agree. */
inline bool is_cone_leaf( graph const& g, schedule const& s, std::size_t v )
{
  if ( g.operand_indices( v ).empty() )
    return true;
  for ( auto p : g.operand_indices( v ) )
    if ( s.stages[p] < s.stages[v] )
      return true;
  return false;
}

inline std::vector<std::string> sorted_ids( graph const& g, std::vector<std::size_t> const& idx )
{
  std::vector<std::string> ids;
  ids.reserve( idx.size() );
  for ( auto i : idx )
    ids.push_back( g.at( i ).id );
  std::sort( ids.begin(), ids.end() );
  return ids;
}

} // namespace detail

/*! \brief Expands a candidate into the single-root cone feeding its dst:
 *         DFS over operand edges within the stage, stopping at stage
 *         boundaries and primary inputs (those become the leaves).
 */
inline subgraph expand_to_cone( candidate_path const& c, graph const& g, schedule const& s )
{
  std::size_t const root = g.index_of( c.dst );
  std::vector<std::size_t> stack{ root };
  std::set<std::size_t> nodes;
  std::set<std::size_t> leaves;
  while ( !stack.empty() )
  {
    std::size_t const v = stack.back();
    stack.pop_back();
    if ( !nodes.insert( v ).second )
      continue;
    if ( detail::is_cone_leaf( g, s, v ) )
    {
      leaves.insert( v );
      continue;
    }
    for ( auto p : g.operand_indices( v ) )
      stack.push_back( p ); /* interior node: all operands share the stage */
  }

  subgraph sg;
  sg.kind = subgraph_kind::cone;
  sg.nodes = detail::sorted_ids( g, { nodes.begin(), nodes.end() } );
  sg.leaves = detail::sorted_ids( g, { leaves.begin(), leaves.end() } );
  sg.roots = { c.dst };
  return sg;
}

/*! \brief Realizes one maximum-delay src~>dst path inside the stage (longest
 *         by individual delays, backtracked through the DP).
 */
inline subgraph realize_path( candidate_path const& c, graph const& g, schedule const& s )
{
  std::size_t const src = g.index_of( c.src );
  std::size_t const dst = g.index_of( c.dst );
  std::int64_t const stage = s.stages[dst];

  std::vector<std::int64_t> dist( g.size(), delay_matrix::unconnected );
  std::vector<std::size_t> pre( g.size(), g.size() );
  dist[src] = g.at( src ).delay_ps;
  for ( auto v : g.topo_indices() )
  {
    if ( s.stages[v] != stage )
      continue;
    for ( auto p : g.operand_indices( v ) )
    {
      if ( s.stages[p] != stage || dist[p] == delay_matrix::unconnected )
        continue;
      std::int64_t const cand = dist[p] + g.at( v ).delay_ps;
      if ( cand > dist[v] || ( cand == dist[v] && pre[v] != g.size() && g.at( p ).id < g.at( pre[v] ).id ) )
      {
        dist[v] = cand;
        pre[v] = p;
      }
    }
  }

  std::vector<std::size_t> path;
  for ( std::size_t v = dst; v != g.size(); v = pre[v] )
  {
    path.push_back( v );
    if ( v == src )
      break;
  }

  subgraph sg;
  sg.kind = subgraph_kind::path;
  sg.nodes = detail::sorted_ids( g, path );
  sg.leaves = { c.src };
  sg.roots = { c.dst };
  return sg;
}

/*! \brief Merges cones whose leaf sets overlap (transitively) into windows.
 *
 * Merges that would exceed `node_cap` member nodes are skipped and the
 * involved cones pass through individually. Output ordered by smallest
 * member root id.
 */
inline std::vector<subgraph> merge_to_windows( std::vector<subgraph> const& cones, std::size_t node_cap = 64 )
{
  std::vector<subgraph> windows = cones;
  std::sort( windows.begin(), windows.end(), []( subgraph const& a, subgraph const& b ) {
    return a.roots.front() < b.roots.front();
  } );

  auto share_leaf = []( subgraph const& a, subgraph const& b ) {
    std::vector<std::string> shared;
    std::set_intersection( a.leaves.begin(), a.leaves.end(), b.leaves.begin(), b.leaves.end(),
                           std::back_inserter( shared ) );
    return !shared.empty();
  };
  auto merged_union = []( std::vector<std::string> const& a, std::vector<std::string> const& b ) {
    std::vector<std::string> u;
    std::set_union( a.begin(), a.end(), b.begin(), b.end(), std::back_inserter( u ) );
    return u;
  };

  /* transitive closure over leaf overlap, bounded by the node cap */
  bool merged = true;
  while ( merged )
  {
    merged = false;
    for ( std::size_t i = 0; i < windows.size() && !merged; ++i )
    {
      for ( std::size_t j = i + 1; j < windows.size() && !merged; ++j )
      {
        if ( !share_leaf( windows[i], windows[j] ) )
          continue;
        auto nodes = merged_union( windows[i].nodes, windows[j].nodes );
        if ( nodes.size() > node_cap )
          continue;
        windows[i].kind = subgraph_kind::window;
        windows[i].nodes = std::move( nodes );
        windows[i].leaves = merged_union( windows[i].leaves, windows[j].leaves );
        windows[i].roots = merged_union( windows[i].roots, windows[j].roots );
        windows.erase( windows.begin() + static_cast<std::ptrdiff_t>( j ) );
        merged = true;
      }
    }
  }

  std::sort( windows.begin(), windows.end(), []( subgraph const& a, subgraph const& b ) {
    return a.roots.front() < b.roots.front();
  } );
  return windows;
}

} // namespace isdc
