/*!
  \file report.hpp
  \brief File formats emitted by the tools: schedule JSON, iteration report
         CSV, and the detailed JSON report.
*/

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "engine.hpp"
#include "graph.hpp"
#include "sdc.hpp"

namespace isdc
{

inline std::string schedule_to_json( graph const& g, schedule const& s )
{
  nlohmann::json j;
  j["num_stages"] = s.num_stages;
  j["register_bits"] = s.register_bits;
  j["stages"] = nlohmann::json::object();
  for ( std::size_t v = 0; v < g.size(); ++v )
    j["stages"][g.at( v ).id] = s.stages[v];
  return j.dump( 2 ) + "\n";
}

/*! \brief CSV per iteration; `subgraphs` is the number evaluated that
 *         iteration (details live in the JSON report).
 */
inline std::string reports_to_csv( std::vector<iteration_report> const& reports )
{
  std::ostringstream os;
  os << "iteration,register_bits,num_stages,estimated_cp_ps,subgraphs,wall_time_ms\n";
  for ( auto const& r : reports )
  {
    os << r.iteration << ',' << r.register_bits << ',' << r.num_stages << ',' << r.estimated_critical_path_ps
       << ',' << r.subgraphs.size() << ',' << r.wall_time_ms << '\n';
  }
  return os.str();
}

inline std::string reports_to_json( std::vector<iteration_report> const& reports )
{
  nlohmann::json j = nlohmann::json::array();
  for ( auto const& r : reports )
  {
    nlohmann::json jr;
    jr["iteration"] = r.iteration;
    jr["register_bits"] = r.register_bits;
    jr["num_stages"] = r.num_stages;
    jr["estimated_cp_ps"] = r.estimated_critical_path_ps;
    jr["wall_time_ms"] = r.wall_time_ms;
    if ( r.oracle_failed )
      jr["oracle_failed"] = true;
    if ( !r.note.empty() )
      jr["note"] = r.note;
    jr["subgraphs"] = nlohmann::json::array();
    for ( auto const& sg : r.subgraphs )
    {
      nlohmann::json js;
      js["id"] = sg.id;
      js["kind"] = to_string( sg.kind );
      js["nodes"] = sg.nodes;
      js["leaves"] = sg.leaves;
      js["roots"] = sg.roots;
      js["delay_ps"] = sg.delay_ps;
      jr["subgraphs"].push_back( std::move( js ) );
    }
    j.push_back( std::move( jr ) );
  }
  return j.dump( 2 ) + "\n";
}

} // namespace isdc
