/*!
  \file delay_matrix.hpp
  \brief All-pairs critical-path delay matrix: initialization, feedback
         folding, and the quadratic propagation sweep that refreshes the
         timing constraints.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "graph.hpp"

namespace isdc
{

/*! \brief n x n estimated critical-path delays in picoseconds.
 *
 * `unconnected` (-1) marks node pairs without a directed path. The diagonal
 * holds individual node delays. Entries only ever decrease once feedback is
 * folded in, except that propagation may discover new finite entries for
 * previously unconnected pairs.
 */
class delay_matrix
{
public:
  static constexpr std::int64_t unconnected = -1;

  explicit delay_matrix( std::size_t n ) : n_( n ), d_( n * n, unconnected ) {}

  std::size_t size() const { return n_; }

  std::int64_t at( std::size_t u, std::size_t v ) const { return d_[u * n_ + v]; }
  void set( std::size_t u, std::size_t v, std::int64_t val ) { d_[u * n_ + v] = val; }

  bool connected( std::size_t u, std::size_t v ) const { return at( u, v ) != unconnected; }

private:
  std::size_t n_;
  std::vector<std::int64_t> d_;
};

/*! \brief Exact longest-path initialization: d[u][v] = max-delay path u~>v
 *         by summed individual delays, d[v][v] = individual delay, -1 when
 *         unconnected.
 */
inline delay_matrix init_matrix( graph const& g )
{
  std::size_t const n = g.size();
  delay_matrix m( n );
  for ( std::size_t u = 0; u < n; ++u )
  {
    /* longest path from u over the topological order */
    std::vector<std::int64_t> dist( n, delay_matrix::unconnected );
    dist[u] = g.at( u ).delay_ps;
    for ( auto v : g.topo_indices() )
    {
      for ( auto p : g.operand_indices( v ) )
      {
        if ( dist[p] == delay_matrix::unconnected )
          continue;
        std::int64_t const cand = dist[p] + g.at( v ).delay_ps;
        if ( cand > dist[v] )
          dist[v] = cand;
      }
    }
    for ( std::size_t v = 0; v < n; ++v )
      m.set( u, v, dist[v] );
  }
  return m;
}

/*! \brief One evaluated subgraph: its member node ids and the measured delay. */
struct subgraph_feedback
{
  std::vector<std::string> nodes;
  std::int64_t delay_ps;
};

/*! \brief Folds measured subgraph delays into the matrix.
 *
 * For every node pair inside an evaluated subgraph whose current estimate is
 * finite and larger than the measured delay, the entry is lowered to the
 * measurement. Unconnected entries stay unconnected.
 */
inline void update_with_feedback( delay_matrix& m, graph const& g, std::vector<subgraph_feedback> const& evaluated )
{
  for ( auto const& fb : evaluated )
  {
    std::vector<std::size_t> members;
    members.reserve( fb.nodes.size() );
    for ( auto const& id : fb.nodes )
      members.push_back( g.index_of( id ) ); /* throws unknown_node_error */
    for ( auto u : members )
    {
      for ( auto v : members )
      {
        std::int64_t const cur = m.at( u, v );
        if ( cur != delay_matrix::unconnected && cur > fb.delay_ps )
          m.set( u, v, fb.delay_ps );
      }
    }
  }
}

/*! \brief One forward + one reverse propagation sweep.
 *
 * Forward: in topological order, the delay from any u to v is re-estimated as
 * max over operands p of d[u][p] + d[v][v]; the entry is taken when it is
 * smaller than the current one or the pair was unconnected. Reverse: the
 * mirror over users in reverse topological order, catching complementary
 * paths the forward order misses.
 */
inline void propagate( delay_matrix& m, graph const& g )
{
  std::size_t const n = g.size();
  std::vector<std::int64_t> cand( n );

  for ( auto v : g.topo_indices() )
  {
    std::fill( cand.begin(), cand.end(), delay_matrix::unconnected );
    std::int64_t const dv = m.at( v, v );
    for ( auto p : g.operand_indices( v ) )
    {
      for ( std::size_t u = 0; u < n; ++u )
      {
        std::int64_t const up = m.at( u, p );
        if ( up == delay_matrix::unconnected )
          continue;
        if ( cand[u] < up + dv )
          cand[u] = up + dv;
      }
    }
    for ( std::size_t u = 0; u < n; ++u )
    {
      if ( cand[u] == delay_matrix::unconnected )
        continue;
      std::int64_t const cur = m.at( u, v );
      if ( cur > cand[u] || cur == delay_matrix::unconnected )
        m.set( u, v, cand[u] );
    }
  }

  for ( auto it = g.topo_indices().rbegin(); it != g.topo_indices().rend(); ++it )
  {
    std::size_t const u = *it;
    std::fill( cand.begin(), cand.end(), delay_matrix::unconnected );
    std::int64_t const du = m.at( u, u );
    for ( auto const& use : g.uses_of( u ) )
    {
      std::size_t const c = use.consumer;
      for ( std::size_t v = 0; v < n; ++v )
      {
        std::int64_t const cv = m.at( c, v );
        if ( cv == delay_matrix::unconnected )
          continue;
        if ( cand[v] < cv + du )
          cand[v] = cv + du;
      }
    }
    for ( std::size_t v = 0; v < n; ++v )
    {
      if ( cand[v] == delay_matrix::unconnected )
        continue;
      std::int64_t const cur = m.at( u, v );
      if ( cur > cand[v] || cur == delay_matrix::unconnected )
        m.set( u, v, cand[v] );
    }
  }
}

/*! \brief A pair whose estimated delay exceeds the clock period, with the
 *         minimum stage gap required between the two nodes.
 */
struct timing_pair
{
  std::size_t u;
  std::size_t v;
  std::int64_t gap; /* ceil(d / t_clk) - 1, always >= 1 */
};

inline std::vector<timing_pair> timing_pairs( delay_matrix const& m, std::int64_t t_clk )
{
  std::vector<timing_pair> out;
  for ( std::size_t u = 0; u < m.size(); ++u )
  {
    for ( std::size_t v = 0; v < m.size(); ++v )
    {
      std::int64_t const d = m.at( u, v );
      if ( d > t_clk )
        out.push_back( timing_pair{ u, v, ( d + t_clk - 1 ) / t_clk - 1 } );
    }
  }
  return out;
}

/*! \brief Debug dump: CSV, rows/columns in topological order. */
inline std::string dump_matrix_csv( delay_matrix const& m, graph const& g )
{
  std::ostringstream os;
  os << "id";
  for ( auto v : g.topo_indices() )
    os << ',' << g.at( v ).id;
  os << '\n';
  for ( auto u : g.topo_indices() )
  {
    os << g.at( u ).id;
    for ( auto v : g.topo_indices() )
      os << ',' << m.at( u, v );
    os << '\n';
  }
  return os.str();
}

} // namespace isdc
