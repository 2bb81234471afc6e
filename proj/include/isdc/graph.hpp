/*!
  \file graph.hpp
  \brief Dataflow-graph IR: nodes, parsing, validation, topological utilities.
*/

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace isdc
{

class graph_error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/*! \brief Malformed graph file (syntax or field-level violation). */
class parse_error : public graph_error
{
public:
  using graph_error::graph_error;
};

class duplicate_id_error : public graph_error
{
public:
  using graph_error::graph_error;
};

class dangling_operand_error : public graph_error
{
public:
  using graph_error::graph_error;
};

class cycle_error : public graph_error
{
public:
  using graph_error::graph_error;
};

class unknown_node_error : public graph_error
{
public:
  using graph_error::graph_error;
};

/*! \brief One operation of the dataflow IR.
 *
 * Every node produces exactly one result of width `bits`. `delay_ps` is the
 * individual combinational delay. Nodes with op "input" are primary inputs:
 * no operands, zero delay.
 */
struct node
{
  std::string id;
  std::string op;
  std::int64_t bits = 1;
  std::int64_t delay_ps = 0;
  std::vector<std::string> operands;

  bool is_input() const
  {
    return operands.empty();
  }
};

/*! \brief One use of a node's result: `consumer` lists `producer` at `operand_index`. */
struct value_use
{
  std::size_t producer;
  std::size_t consumer;
  std::size_t operand_index;
};

/*! \brief Immutable, validated dataflow DAG.
 *
 * Construction validates all invariants (unique ids, resolvable operands,
 * acyclicity) and precomputes the topological order (ties broken by file
 * order) and the use lists. Safe for concurrent reads afterwards.
 */
class graph
{
public:
  graph( std::string name, std::int64_t clock_period_ps, std::vector<node> nodes )
      : name_( std::move( name ) ), clock_period_ps_( clock_period_ps ), nodes_( std::move( nodes ) )
  {
    validate_and_index();
  }

  std::string const& name() const { return name_; }
  std::int64_t clock_period_ps() const { return clock_period_ps_; }
  std::size_t size() const { return nodes_.size(); }
  std::vector<node> const& nodes() const { return nodes_; }
  node const& at( std::size_t i ) const { return nodes_.at( i ); }

  std::size_t index_of( std::string_view id ) const
  {
    auto it = index_.find( std::string( id ) );
    if ( it == index_.end() )
      throw unknown_node_error( "unknown node id: " + std::string( id ) );
    return it->second;
  }

  bool contains( std::string_view id ) const
  {
    return index_.count( std::string( id ) ) != 0;
  }

  /*! \brief Node indices in topological order, ties broken by file order. */
  std::vector<std::size_t> const& topo_indices() const { return topo_; }

  /*! \brief Operand node indices of node `i`, one entry per operand slot. */
  std::vector<std::size_t> const& operand_indices( std::size_t i ) const { return operand_idx_.at( i ); }

  /*! \brief All uses of node `i`'s result, in (consumer topo, operand index) order. */
  std::vector<value_use> const& uses_of( std::size_t i ) const { return uses_.at( i ); }

private:
  void validate_and_index();

  std::string name_;
  std::int64_t clock_period_ps_;
  std::vector<node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> operand_idx_;
  std::vector<std::size_t> topo_;
  std::vector<std::vector<value_use>> uses_;
};

inline void graph::validate_and_index()
{
  if ( clock_period_ps_ <= 0 )
    throw parse_error( "clock_period_ps must be positive" );
  if ( nodes_.empty() )
    throw parse_error( "graph must contain at least one node" );

  for ( std::size_t i = 0; i < nodes_.size(); ++i )
  {
    node const& n = nodes_[i];
    if ( n.bits < 1 )
      throw parse_error( "node " + n.id + ": bits must be >= 1" );
    if ( n.delay_ps < 0 )
      throw parse_error( "node " + n.id + ": delay_ps must be >= 0" );
    if ( n.op == "input" && !n.operands.empty() )
      throw parse_error( "node " + n.id + ": input nodes take no operands" );
    if ( n.op == "input" && n.delay_ps != 0 )
      throw parse_error( "node " + n.id + ": input nodes have delay_ps = 0" );
    if ( !index_.emplace( n.id, i ).second )
      throw duplicate_id_error( "duplicate node id: " + n.id );
  }

  operand_idx_.resize( nodes_.size() );
  for ( std::size_t i = 0; i < nodes_.size(); ++i )
  {
    for ( auto const& op_id : nodes_[i].operands )
    {
      auto it = index_.find( op_id );
      if ( it == index_.end() )
        throw dangling_operand_error( "node " + nodes_[i].id + " references missing id \"" + op_id + "\"" );
      operand_idx_[i].push_back( it->second );
    }
  }

  /* Kahn's algorithm; among ready nodes always pick the smallest file index. */
  std::vector<std::size_t> indegree( nodes_.size(), 0 );
  for ( std::size_t i = 0; i < nodes_.size(); ++i )
    indegree[i] = operand_idx_[i].size();

  std::vector<bool> done( nodes_.size(), false );
  topo_.reserve( nodes_.size() );
  while ( topo_.size() < nodes_.size() )
  {
    std::size_t pick = nodes_.size();
    for ( std::size_t i = 0; i < nodes_.size(); ++i )
    {
      if ( !done[i] && indegree[i] == 0 )
      {
        pick = i;
        break;
      }
    }
    if ( pick == nodes_.size() )
      throw cycle_error( "cycle detected in operand relation of graph " + name_ );
    done[pick] = true;
    topo_.push_back( pick );
    for ( std::size_t i = 0; i < nodes_.size(); ++i )
    {
      if ( done[i] )
        continue;
      for ( auto p : operand_idx_[i] )
        if ( p == pick )
          --indegree[i];
    }
  }

  uses_.resize( nodes_.size() );
  for ( auto c : topo_ )
    for ( std::size_t slot = 0; slot < operand_idx_[c].size(); ++slot )
      uses_[operand_idx_[c][slot]].push_back( value_use{ operand_idx_[c][slot], c, slot } );
}

/*! \brief Node ids in topological order (ties broken by file order). */
inline std::vector<std::string> topo_order( graph const& g )
{
  std::vector<std::string> out;
  out.reserve( g.size() );
  for ( auto i : g.topo_indices() )
    out.push_back( g.at( i ).id );
  return out;
}

/*! \brief All uses of node `id`'s result. */
inline std::vector<value_use> users( graph const& g, std::string_view id )
{
  return g.uses_of( g.index_of( id ) );
}

inline graph parse_graph( std::string_view text )
{
  nlohmann::json j;
  try
  {
    j = nlohmann::json::parse( text );
  }
  catch ( nlohmann::json::parse_error const& e )
  {
    throw parse_error( std::string( "graph file syntax error: " ) + e.what() );
  }

  try
  {
    if ( !j.is_object() )
      throw parse_error( "graph file must be a JSON object" );
    std::string name = j.at( "name" ).get<std::string>();
    std::int64_t clock = j.at( "clock_period_ps" ).get<std::int64_t>();
    std::vector<node> nodes;
    for ( auto const& jn : j.at( "nodes" ) )
    {
      node n;
      n.id = jn.at( "id" ).get<std::string>();
      n.op = jn.at( "op" ).get<std::string>();
      n.bits = jn.at( "bits" ).get<std::int64_t>();
      n.delay_ps = jn.at( "delay_ps" ).get<std::int64_t>();
      n.operands = jn.at( "operands" ).get<std::vector<std::string>>();
      nodes.push_back( std::move( n ) );
    }
    return graph( std::move( name ), clock, std::move( nodes ) );
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw parse_error( std::string( "graph file field error: " ) + e.what() );
  }
}

inline std::string serialize_graph( graph const& g )
{
  nlohmann::json j;
  j["name"] = g.name();
  j["clock_period_ps"] = g.clock_period_ps();
  j["nodes"] = nlohmann::json::array();
  for ( auto const& n : g.nodes() )
  {
    nlohmann::json jn;
    jn["id"] = n.id;
    jn["op"] = n.op;
    jn["bits"] = n.bits;
    jn["delay_ps"] = n.delay_ps;
    jn["operands"] = n.operands;
    j["nodes"].push_back( std::move( jn ) );
  }
  return j.dump( 2 ) + "\n";
}

} // namespace isdc
