/*!
  \file sdc.hpp
  \brief Difference-constraint formulation of pipeline scheduling and an
         exact integral solver for it.

  The LP minimizes total register bits, expressed with one stage variable s_v
  and one lifetime-end variable m_v per node (m_v >= s_v and m_v >= s_c for
  every consumer c). All constraints are differences, so the constraint
  matrix is totally unimodular and the LP optimum is integral. We solve the
  dual min-cost flow with successive shortest paths and read the optimal
  stages off the node potentials, which keeps every intermediate value an
  integer.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "delay_matrix.hpp"
#include "graph.hpp"

namespace isdc
{

/*! \brief Infeasible difference system; the message names one violated
 *         constraint cycle.
 */
class infeasible_error : public graph_error
{
public:
  using graph_error::graph_error;
};

/*! \brief A schedule variable: the stage s_v or the lifetime end m_v of a node. */
struct var_id
{
  enum class kind : std::uint8_t
  {
    stage,
    lifetime_end
  };

  kind k;
  std::uint32_t node;

  bool operator==( var_id const& ) const = default;
};

/*! \brief Encodes minuend - subtrahend <= bound. */
struct difference_constraint
{
  var_id minuend;
  var_id subtrahend;
  std::int64_t bound;
};

/*! \brief Pipeline schedule: stage per node plus the derived register cost. */
struct schedule
{
  std::vector<std::int64_t> stages; /* indexed like graph::nodes() */
  std::int64_t num_stages = 0;
  std::int64_t register_bits = 0;

  std::int64_t stage_of( graph const& g, std::string_view id ) const
  {
    return stages.at( g.index_of( id ) );
  }
};

/*! \brief Total register bits: each value pays bits x (last consuming stage
 *         - defining stage); dead values pay nothing.
 */
inline std::int64_t register_cost( graph const& g, std::vector<std::int64_t> const& stages )
{
  std::int64_t total = 0;
  for ( std::size_t v = 0; v < g.size(); ++v )
  {
    std::int64_t last = stages[v];
    for ( auto const& use : g.uses_of( v ) )
      last = std::max( last, stages[use.consumer] );
    total += g.at( v ).bits * ( last - stages[v] );
  }
  return total;
}

inline std::int64_t register_cost( graph const& g, schedule const& s )
{
  return register_cost( g, s.stages );
}

/*! \brief Emits the full difference system for graph `g` under delay matrix
 *         `d`: dependence constraints per edge, stage-gap timing
 *         constraints per over-period pair, and the lifetime couplings that
 *         carry the register objective.
 */
inline std::vector<difference_constraint> build_constraints( graph const& g, delay_matrix const& d, std::int64_t t_clk )
{
  std::vector<difference_constraint> cs;
  auto s = []( std::size_t v ) { return var_id{ var_id::kind::stage, static_cast<std::uint32_t>( v ) }; };
  auto m = []( std::size_t v ) { return var_id{ var_id::kind::lifetime_end, static_cast<std::uint32_t>( v ) }; };

  for ( std::size_t v = 0; v < g.size(); ++v )
    for ( auto p : g.operand_indices( v ) )
      cs.push_back( { s( p ), s( v ), 0 } ); /* s_p <= s_v */

  for ( auto const& tp : timing_pairs( d, t_clk ) )
    cs.push_back( { s( tp.u ), s( tp.v ), -tp.gap } );

  for ( std::size_t v = 0; v < g.size(); ++v )
  {
    cs.push_back( { s( v ), m( v ), 0 } ); /* m_v >= s_v */
    for ( auto const& use : g.uses_of( v ) )
      cs.push_back( { s( use.consumer ), m( v ), 0 } ); /* m_v >= s_c */
  }
  return cs;
}

namespace detail
{

/* Min-cost flow with unbounded arc capacities, used as the exact solver for
 * the difference-constraint LP. Arcs mirror the constraints; node supplies
 * mirror the objective weights; optimal primal values are the negated final
 * potentials. */
class difference_lp_solver
{
public:
  explicit difference_lp_solver( std::size_t num_vars ) : head_( num_vars ), excess_( num_vars, 0 ) {}

  void add_constraint_arc( std::size_t minuend, std::size_t subtrahend, std::int64_t bound, std::size_t constraint_index )
  {
    add_arc( minuend, subtrahend, bound, constraint_index );
  }

  /* inflow - outflow at `v` must equal `w` */
  void add_weight( std::size_t v, std::int64_t w )
  {
    excess_[v] += w;
  }

  /* Returns the optimal integral variable values (shift-normalized by the
   * caller). Throws infeasible_error on a negative constraint cycle; the
   * callback renders constraint `i` for the message. */
  template<typename RenderConstraint>
  std::vector<std::int64_t> solve( RenderConstraint const& render )
  {
    bellman_ford_potentials( render );

    /* successive shortest paths with reduced costs */
    std::size_t const n = head_.size();
    while ( true )
    {
      std::size_t src = n;
      for ( std::size_t v = 0; v < n; ++v )
      {
        if ( excess_[v] < 0 )
        {
          src = v;
          break;
        }
      }
      if ( src == n )
        break;

      auto [dist, pre] = dijkstra( src );
      std::size_t sink = n;
      for ( std::size_t v = 0; v < n; ++v )
      {
        if ( excess_[v] > 0 && dist[v] != kInf )
        {
          if ( sink == n || dist[v] < dist[sink] )
            sink = v;
        }
      }
      if ( sink == n )
        throw infeasible_error( "difference system is disconnected from its objective (internal error)" );

      for ( std::size_t v = 0; v < n; ++v )
        pot_[v] += std::min( dist[v], dist[sink] );

      std::int64_t amount = std::min( -excess_[src], excess_[sink] );
      for ( std::size_t v = sink; v != src; v = arcs_[pre[v]].from )
        amount = std::min( amount, arcs_[pre[v]].cap );
      for ( std::size_t v = sink; v != src; v = arcs_[pre[v]].from )
        push( pre[v], amount );
      excess_[src] += amount;
      excess_[sink] -= amount;
    }

    std::vector<std::int64_t> x( head_.size() );
    for ( std::size_t v = 0; v < head_.size(); ++v )
      x[v] = -pot_[v];
    return x;
  }

private:
  static constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
  static constexpr std::int64_t kUncapped = std::numeric_limits<std::int64_t>::max() / 4;

  struct arc
  {
    std::size_t from;
    std::size_t to;
    std::int64_t cap;
    std::int64_t cost;
    std::size_t constraint_index; /* valid for forward arcs only */
    bool forward;
  };

  void add_arc( std::size_t a, std::size_t b, std::int64_t cost, std::size_t ci )
  {
    head_[a].push_back( arcs_.size() );
    arcs_.push_back( { a, b, kUncapped, cost, ci, true } );
    head_[b].push_back( arcs_.size() );
    arcs_.push_back( { b, a, 0, -cost, ci, false } );
  }

  void push( std::size_t ai, std::int64_t amount )
  {
    arcs_[ai].cap -= amount;
    arcs_[ai ^ 1].cap += amount;
  }

  template<typename RenderConstraint>
  void bellman_ford_potentials( RenderConstraint const& render )
  {
    std::size_t const n = head_.size();
    pot_.assign( n, 0 );
    std::vector<std::size_t> pre_arc( n, arcs_.size() );
    std::size_t relaxed_node = n;
    for ( std::size_t round = 0; round <= n; ++round )
    {
      relaxed_node = n;
      for ( std::size_t ai = 0; ai < arcs_.size(); ai += 2 )
      {
        arc const& a = arcs_[ai];
        if ( pot_[a.from] + a.cost < pot_[a.to] )
        {
          pot_[a.to] = pot_[a.from] + a.cost;
          pre_arc[a.to] = ai;
          relaxed_node = a.to;
        }
      }
      if ( relaxed_node == n )
        return;
    }

    /* negative cycle: walk predecessors until a node repeats, then report
     * the constraints along the cycle */
    std::vector<bool> seen( n, false );
    std::size_t v = relaxed_node;
    while ( pre_arc[v] != arcs_.size() && !seen[v] )
    {
      seen[v] = true;
      v = arcs_[pre_arc[v]].from;
    }
    std::ostringstream msg;
    msg << "infeasible difference-constraint system";
    if ( pre_arc[v] != arcs_.size() )
    {
      msg << "; violated constraint cycle:";
      std::size_t u = v;
      do
      {
        msg << "\n  " << render( arcs_[pre_arc[u]].constraint_index );
        u = arcs_[pre_arc[u]].from;
      } while ( u != v );
    }
    throw infeasible_error( msg.str() );
  }

  std::pair<std::vector<std::int64_t>, std::vector<std::size_t>> dijkstra( std::size_t src ) const
  {
    std::size_t const n = head_.size();
    std::vector<std::int64_t> dist( n, kInf );
    std::vector<std::size_t> pre( n, arcs_.size() );
    std::vector<bool> done( n, false );
    using item = std::pair<std::int64_t, std::size_t>;
    std::priority_queue<item, std::vector<item>, std::greater<item>> pq;
    dist[src] = 0;
    pq.push( { 0, src } );
    while ( !pq.empty() )
    {
      auto [d, v] = pq.top();
      pq.pop();
      if ( done[v] )
        continue;
      done[v] = true;
      for ( auto ai : head_[v] )
      {
        arc const& a = arcs_[ai];
        if ( a.cap <= 0 )
          continue;
        std::int64_t const nd = d + a.cost + pot_[v] - pot_[a.to];
        if ( nd < dist[a.to] )
        {
          dist[a.to] = nd;
          pre[a.to] = ai;
          pq.push( { nd, a.to } );
        }
      }
    }
    return { std::move( dist ), std::move( pre ) };
  }

  std::vector<std::vector<std::size_t>> head_;
  std::vector<arc> arcs_;
  std::vector<std::int64_t> excess_;
  std::vector<std::int64_t> pot_;
};

inline std::string render_constraint( graph const& g, difference_constraint const& c )
{
  auto name = [&]( var_id v ) {
    return ( v.k == var_id::kind::stage ? "s[" : "m[" ) + g.at( v.node ).id + "]";
  };
  return name( c.minuend ) + " - " + name( c.subtrahend ) + " <= " + std::to_string( c.bound );
}

/* Upper bound on any stage an optimal schedule needs: the longest path over
 * dependence edges weighted by the required timing gaps. */
inline std::int64_t asap_stage_bound( graph const& g, std::vector<difference_constraint> const& cs )
{
  std::vector<std::int64_t> asap( g.size(), 0 );
  /* gap constraints relate stage vars only; relax in topological order (the
   * minuend of every emitted stage constraint precedes the subtrahend) */
  std::vector<std::size_t> topo_pos( g.size() );
  for ( std::size_t i = 0; i < g.topo_indices().size(); ++i )
    topo_pos[g.topo_indices()[i]] = i;
  auto stage_cs = cs;
  std::stable_sort( stage_cs.begin(), stage_cs.end(), [&]( auto const& a, auto const& b ) {
    return topo_pos[a.subtrahend.node] < topo_pos[b.subtrahend.node];
  } );
  for ( auto const& c : stage_cs )
  {
    if ( c.minuend.k != var_id::kind::stage || c.subtrahend.k != var_id::kind::stage )
      continue;
    if ( c.bound > 0 )
      continue;
    asap[c.subtrahend.node] = std::max( asap[c.subtrahend.node], asap[c.minuend.node] - c.bound );
  }
  std::int64_t bound = 0;
  for ( auto v : asap )
    bound = std::max( bound, v );
  return bound;
}

} // namespace detail

/*! \brief Solves the difference system to an exact integral optimum.
 *
 * Primary objective: minimize total register bits, sum of bits(v) x
 * (m_v - s_v). Secondary: minimize the stage sum, which normalizes ties
 * toward earlier stages. Stages are shifted so the minimum is 0.
 *
 * Throws infeasible_error when the system has no solution (e.g. a single
 * node slower than the clock period); the message suggests raising the
 * clock period.
 */
inline schedule solve( graph const& g, std::vector<difference_constraint> const& constraints )
{
  std::size_t const n = g.size();
  auto var_index = [n]( var_id v ) {
    return ( v.k == var_id::kind::stage ? 0 : n ) + v.node;
  };
  std::size_t const ground = 2 * n;

  detail::difference_lp_solver lp( 2 * n + 1 );
  for ( std::size_t i = 0; i < constraints.size(); ++i )
    lp.add_constraint_arc( var_index( constraints[i].minuend ), var_index( constraints[i].subtrahend ),
                           constraints[i].bound, i );
  for ( std::size_t v = 0; v < n; ++v )
    lp.add_constraint_arc( ground, v, 0, constraints.size() ); /* ground <= every s_v */

  /* Lexicographic weights: register bits dominate the stage-sum tie break.
   * Any optimal schedule fits within the ASAP stage bound, so a register-bit
   * step always outweighs the largest possible stage-sum difference. */
  std::int64_t const stage_bound = detail::asap_stage_bound( g, constraints );
  std::int64_t const big = static_cast<std::int64_t>( n ) * ( stage_bound + 1 ) + 2;
  for ( std::size_t v = 0; v < n; ++v )
  {
    lp.add_weight( v, 1 - big * g.at( v ).bits );      /* s_v */
    lp.add_weight( n + v, big * g.at( v ).bits );      /* m_v */
  }
  lp.add_weight( ground, -static_cast<std::int64_t>( n ) );

  std::vector<std::int64_t> x;
  try
  {
    x = lp.solve( [&]( std::size_t ci ) {
      return ci < constraints.size() ? detail::render_constraint( g, constraints[ci] )
                                     : std::string( "0 <= s[v] (ground)" );
    } );
  }
  catch ( infeasible_error const& e )
  {
    throw infeasible_error( std::string( e.what() ) + "\nhint: raising clock_period_ps may make the graph schedulable" );
  }

  schedule s;
  s.stages.resize( n );
  std::int64_t lo = x[0];
  for ( std::size_t v = 1; v < n; ++v )
    lo = std::min( lo, x[v] );
  std::int64_t hi = 0;
  for ( std::size_t v = 0; v < n; ++v )
  {
    s.stages[v] = x[v] - lo;
    hi = std::max( hi, s.stages[v] );
  }
  s.num_stages = hi + 1;
  s.register_bits = register_cost( g, s.stages );
  return s;
}

/*! \brief Checks every constraint against a stage assignment (lifetime ends
 *         derived as the last consuming stage). Test and debugging helper.
 */
inline bool satisfies( graph const& g, std::vector<difference_constraint> const& cs, std::vector<std::int64_t> const& stages )
{
  std::size_t const n = g.size();
  std::vector<std::int64_t> val( 2 * n );
  for ( std::size_t v = 0; v < n; ++v )
  {
    val[v] = stages[v];
    std::int64_t last = stages[v];
    for ( auto const& use : g.uses_of( v ) )
      last = std::max( last, stages[use.consumer] );
    val[n + v] = last;
  }
  auto idx = [n]( var_id v ) { return ( v.k == var_id::kind::stage ? 0 : n ) + v.node; };
  for ( auto const& c : cs )
    if ( val[idx( c.minuend )] - val[idx( c.subtrahend )] > c.bound )
      return false;
  return true;
}

} // namespace isdc
