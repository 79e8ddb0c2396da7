#include "gatekit/train.hpp"

#include "gatekit/error.hpp"
#include "gatekit/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace gatekit
{

using grad::matrix;
using grad::tensor;

namespace
{

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

matrix column_of( std::vector<double> const& v )
{
  matrix m( static_cast<Eigen::Index>( v.size() ), 1 );
  std::copy( v.begin(), v.end(), m.data() );
  return m;
}

using node_ref = std::pair<std::uint32_t, node_index>;

std::vector<node_ref> gates_of( std::span<circuit_record const* const> batch )
{
  std::vector<node_ref> out;
  for ( std::uint32_t c = 0; c < batch.size(); ++c )
  {
    auto const& g = batch[c]->graph;
    for ( node_index n = 0; n < g.size(); ++n )
    {
      if ( !g.is_pi( n ) )
      {
        out.emplace_back( c, n );
      }
    }
  }
  return out;
}

embedding_state batch_forward( model const& m, std::span<circuit_record const* const> batch, std::vector<matrix> const& pi_rows )
{
  std::vector<aig const*> graphs;
  graphs.reserve( batch.size() );
  for ( auto const* r : batch )
  {
    graphs.push_back( &r->graph );
  }
  return forward( m, graphs, pi_rows );
}

template<typename Fn>
void for_each_batch( std::span<circuit_record const> records, std::size_t batch_size, model const& m, Fn&& fn )
{
  batch_size = std::max<std::size_t>( batch_size, 1u );
  for ( std::size_t start = 0; start < records.size(); start += batch_size )
  {
    auto const end = std::min( records.size(), start + batch_size );
    std::vector<circuit_record const*> batch;
    std::vector<matrix> pis;
    for ( auto k = start; k < end; ++k )
    {
      batch.push_back( &records[k] );
      pis.push_back( evaluation_pi_rows( m.config(), records[k], k ) );
    }
    fn( batch, batch_forward( m, batch, pis ) );
  }
}

} // namespace

tensor loss_functionality( std::span<double const> dist_tt, tensor const& dist_h )
{
  if ( dist_tt.size() < 2u || dist_h.rows() != dist_tt.size() )
  {
    throw error( errc::too_few_pairs, "functionality loss needs at least two pairs, got " + std::to_string( dist_tt.size() ) );
  }
  auto const n = static_cast<double>( dist_tt.size() );
  auto const mean_t = std::accumulate( dist_tt.begin(), dist_tt.end(), 0.0 ) / n;
  std::vector<double> centered( dist_tt.begin(), dist_tt.end() );
  for ( auto& v : centered )
  {
    v -= mean_t;
  }
  auto const dh_centered = grad::sub( dist_h, grad::broadcast( grad::mean( dist_h ), dist_h.rows(), 1u ) );
  return grad::sum( grad::abs( grad::sub( tensor::constant( column_of( centered ) ), dh_centered ) ) );
}

loss_parts loss_stage( model const& m, std::span<circuit_record const* const> batch, embedding_state const& state, int stage, train_config const& config )
{
  if ( stage != 1 && stage != 2 )
  {
    throw error( errc::bad_config, "stage must be 1 or 2" );
  }
  loss_parts out;
  std::vector<tensor> terms;
  std::vector<double> weights;

  if ( config.w_prob > 0.0 )
  {
    auto const gates = gates_of( batch );
    if ( gates.empty() )
    {
      throw error( errc::missing_labels, "batch has no gates for the probability task" );
    }
    std::vector<double> target;
    target.reserve( gates.size() );
    for ( auto [c, n] : gates )
    {
      auto const& probs = batch[c]->probs;
      if ( probs.size() != batch[c]->graph.size() )
      {
        throw error( errc::missing_labels, "record lacks logic probabilities" );
      }
      target.push_back( probs[n] );
    }
    auto const pred = predict_prob( m, state.hf_rows( gates ) );
    auto const l = grad::mean( grad::abs( grad::sub( pred, tensor::constant( column_of( target ) ) ) ) );
    out.prob = l.item();
    terms.push_back( l );
    weights.push_back( config.w_prob );
  }

  if ( config.w_rc > 0.0 )
  {
    std::vector<node_ref> lhs, rhs;
    std::vector<double> target;
    for ( std::uint32_t c = 0; c < batch.size(); ++c )
    {
      for ( auto const& p : batch[c]->rc_pairs )
      {
        lhs.emplace_back( c, p.i );
        rhs.emplace_back( c, p.j );
        target.push_back( p.label ? 1.0 : 0.0 );
      }
    }
    if ( target.empty() )
    {
      throw error( errc::missing_labels, "batch has no reconvergence pairs" );
    }
    auto const pred = predict_rc( m, state.hs_rows( lhs ), state.hs_rows( rhs ) );
    auto const l = grad::bce_mean( pred, column_of( target ) );
    out.rc = l.item();
    terms.push_back( l );
    weights.push_back( config.w_rc );
  }

  if ( stage == 2 && config.w_func > 0.0 )
  {
    std::vector<node_ref> lhs, rhs;
    std::vector<double> dist;
    for ( std::uint32_t c = 0; c < batch.size(); ++c )
    {
      for ( auto const& p : batch[c]->pairs )
      {
        lhs.emplace_back( c, p.i );
        rhs.emplace_back( c, p.j );
        dist.push_back( p.dist_tt );
      }
    }
    if ( dist.empty() )
    {
      throw error( errc::missing_labels, "batch has no function pairs" );
    }
    auto const sim = grad::cosine_rows( state.hf_rows( lhs ), state.hf_rows( rhs ) );
    auto const dist_h = grad::sub( tensor::constant( matrix::Ones( sim.value().rows(), 1 ) ), sim );
    auto const l = loss_functionality( dist, dist_h );
    out.func = l.item();
    terms.push_back( l );
    weights.push_back( config.w_func );
  }

  if ( terms.empty() )
  {
    throw error( errc::bad_config, "all loss weights are zero" );
  }
  out.total = grad::scale( terms[0], weights[0] );
  for ( std::size_t k = 1; k < terms.size(); ++k )
  {
    out.total = grad::add( out.total, grad::scale( terms[k], weights[k] ) );
  }
  return out;
}

matrix training_pi_rows( model_config const& config, circuit_record const& r, std::uint64_t seed, std::size_t epoch, std::size_t index )
{
  return pi_structural( config, r.graph.num_pis(), mix_seed( mix_seed( seed, epoch ), index ) ).hs;
}

matrix evaluation_pi_rows( model_config const& config, circuit_record const& r, std::size_t index )
{
  return pi_structural( config, r.graph.num_pis(), mix_seed( config.seed ^ 0x6576616cull, index ) ).hs;
}

matrix functional_embeddings( model const& m, aig const& g )
{
  aig const* graphs[] = { &g };
  matrix const pis[] = { pi_structural( m.config(), g.num_pis(), mix_seed( m.config().seed ^ 0x6576616cull, 0u ) ).hs };
  return forward( m, graphs, pis ).hf( 0 );
}

/* evaluation */

double roc_auc( std::span<scored_pair const> pairs )
{
  std::vector<scored_pair> sorted( pairs.begin(), pairs.end() );
  std::sort( sorted.begin(), sorted.end(), []( auto const& a, auto const& b ) { return a.sim < b.sim; } );
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for ( std::size_t k = 0; k < sorted.size(); )
  {
    auto e = k;
    while ( e < sorted.size() && sorted[e].sim == sorted[k].sim )
    {
      ++e;
    }
    auto const mid_rank = 0.5 * static_cast<double>( k + 1u + e ); // average of ranks k+1..e
    for ( auto t = k; t < e; ++t )
    {
      if ( sorted[t].positive )
      {
        rank_sum += mid_rank;
        pos += 1.0;
      }
      else
      {
        neg += 1.0;
      }
    }
    k = e;
  }
  if ( pos == 0.0 || neg == 0.0 )
  {
    return nan_value;
  }
  return ( rank_sum - pos * ( pos + 1.0 ) / 2.0 ) / ( pos * neg );
}

double select_threshold( std::span<scored_pair const> pairs )
{
  std::vector<scored_pair> sorted( pairs.begin(), pairs.end() );
  std::sort( sorted.begin(), sorted.end(), []( auto const& a, auto const& b ) { return a.sim > b.sim; } );
  double const total_pos = static_cast<double>( std::count_if( sorted.begin(), sorted.end(), []( auto const& p ) { return p.positive; } ) );
  double const total_neg = static_cast<double>( sorted.size() ) - total_pos;
  if ( total_pos == 0.0 )
  {
    throw error( errc::no_positive_pairs, "threshold selection needs at least one equivalent pair" );
  }
  // θ = highest score: nothing predicted positive
  double best_theta = sorted.front().sim, best_j = 0.0;
  double tp = 0.0, fp = 0.0;
  for ( std::size_t k = 0; k < sorted.size(); )
  {
    auto e = k;
    while ( e < sorted.size() && sorted[e].sim == sorted[k].sim )
    {
      sorted[e].positive ? ++tp : ++fp;
      ++e;
    }
    // every score >= sorted[k].sim is now predicted positive: θ is the next lower score
    auto const theta = e < sorted.size() ? sorted[e].sim : sorted.back().sim - 1.0;
    auto const j = tp / total_pos - ( total_neg > 0.0 ? fp / total_neg : 0.0 );
    if ( j > best_j )
    {
      best_j = j;
      best_theta = theta;
    }
    k = e;
  }
  return best_theta;
}

eval_report classify( std::span<scored_pair const> pairs, double threshold )
{
  eval_report r;
  r.threshold = threshold;
  for ( auto const& p : pairs )
  {
    auto const predicted = p.sim > threshold;
    if ( p.positive )
    {
      predicted ? ++r.tp : ++r.fn;
    }
    else
    {
      predicted ? ++r.fp : ++r.tn;
    }
  }
  if ( r.tp + r.fn == 0u )
  {
    throw error( errc::no_positive_pairs, "recall is undefined without equivalent pairs" );
  }
  r.recall = static_cast<double>( r.tp ) / static_cast<double>( r.tp + r.fn );
  r.precision = r.tp + r.fp == 0u ? 0.0 : static_cast<double>( r.tp ) / static_cast<double>( r.tp + r.fp );
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / ( r.precision + r.recall ) : 0.0;
  r.auc = roc_auc( pairs );
  return r;
}

std::vector<scored_pair> score_pairs( model const& m, std::span<circuit_record const> records, std::size_t batch_size )
{
  std::vector<scored_pair> out;
  for_each_batch( records, batch_size, m, [&]( std::vector<circuit_record const*> const& batch, embedding_state const& st ) {
    std::vector<node_ref> lhs, rhs;
    std::vector<bool> labels;
    for ( std::uint32_t c = 0; c < batch.size(); ++c )
    {
      for ( auto const& p : batch[c]->pairs )
      {
        lhs.emplace_back( c, p.i );
        rhs.emplace_back( c, p.j );
        labels.push_back( p.is_equivalent );
      }
    }
    if ( labels.empty() )
    {
      return;
    }
    auto const sim = grad::cosine_rows( st.hf_rows( lhs ), st.hf_rows( rhs ) );
    for ( std::size_t k = 0; k < labels.size(); ++k )
    {
      out.push_back( { sim.value()( static_cast<Eigen::Index>( k ), 0 ), labels[k] } );
    }
  } );
  return out;
}

double prediction_error( model const& m, std::span<circuit_record const> records, std::size_t batch_size )
{
  double total = 0.0;
  std::size_t count = 0;
  for_each_batch( records, batch_size, m, [&]( std::vector<circuit_record const*> const& batch, embedding_state const& st ) {
    auto const gates = gates_of( batch );
    if ( gates.empty() )
    {
      return;
    }
    auto const pred = predict_prob( m, st.hf_rows( gates ) );
    for ( std::size_t k = 0; k < gates.size(); ++k )
    {
      auto [c, n] = gates[k];
      total += std::abs( batch[c]->probs.at( n ) - pred.value()( static_cast<Eigen::Index>( k ), 0 ) );
    }
    count += gates.size();
  } );
  return count == 0u ? nan_value : total / static_cast<double>( count );
}

eval_report evaluate( model const& m, std::span<circuit_record const> test, std::span<circuit_record const> validation )
{
  auto const theta = select_threshold( score_pairs( m, validation ) );
  auto r = classify( score_pairs( m, test ), theta );
  r.pe = prediction_error( m, test );
  return r;
}

/* training */

trainer::trainer( model& m, train_config const& config, std::span<circuit_record const> train, std::span<circuit_record const> validation )
    : m_( m ), config_( config ), train_( train ), validation_( validation ), opt_( config.optimizer, m.params().tensors() )
{
  if ( train.empty() )
  {
    throw error( errc::empty_corpus, "training split is empty" );
  }
  if ( config.epochs_stage1 + config.epochs_stage2 == 0u || config.batch_size == 0u )
  {
    throw error( errc::bad_config, "epochs and batch size must be positive" );
  }
  if ( config.w_prob < 0.0 || config.w_rc < 0.0 || config.w_func < 0.0 )
  {
    throw error( errc::bad_config, "loss weights must be non-negative" );
  }
}

int trainer::stage_of( std::size_t epoch ) const { return config_.multistage && epoch < config_.epochs_stage1 ? 1 : 2; }

epoch_log trainer::run_epoch()
{
  epoch_log log;
  log.epoch = epoch_;
  log.stage = stage_of( epoch_ );

  std::vector<std::size_t> order( train_.size() );
  std::iota( order.begin(), order.end(), std::size_t{ 0 } );
  auto rng = make_rng( mix_seed( config_.seed, epoch_ ), 0x73687566u );
  shuffle( order, rng );

  std::size_t batches = 0;
  for ( std::size_t start = 0; start < order.size(); start += config_.batch_size )
  {
    auto const end = std::min( order.size(), start + config_.batch_size );
    std::vector<circuit_record const*> batch;
    std::vector<matrix> pis;
    for ( auto k = start; k < end; ++k )
    {
      batch.push_back( &train_[order[k]] );
      pis.push_back( training_pi_rows( m_.config(), train_[order[k]], config_.seed, config_.resample_pis ? epoch_ + 1u : 0u, order[k] ) );
    }
    try
    {
      auto const st = batch_forward( m_, batch, pis );
      auto const parts = loss_stage( m_, batch, st, log.stage, config_ );
      opt_.zero_grad();
      grad::backward( parts.total );
      opt_.step();
      for ( auto const& t : m_.params().tensors() )
      {
        if ( !t.value().allFinite() )
        {
          throw error( errc::non_finite_input, "parameter update" );
        }
      }
      step_losses_.push_back( parts.total.item() );
      log.l_prob += parts.prob;
      log.l_rc += parts.rc;
      log.l_func += parts.func;
      ++batches;
    }
    catch ( error const& e )
    {
      if ( e.code() == errc::non_finite_input )
      {
        throw error( errc::divergence_detected, "epoch " + std::to_string( epoch_ ) + ": " + e.what() );
      }
      throw;
    }
  }
  log.l_prob /= static_cast<double>( batches );
  log.l_rc /= static_cast<double>( batches );
  log.l_func /= static_cast<double>( batches );

  log.pe = log.f1 = log.auc = nan_value;
  if ( !validation_.empty() )
  {
    log.pe = prediction_error( m_, validation_, config_.batch_size );
    auto const scored = score_pairs( m_, validation_, config_.batch_size );
    if ( std::any_of( scored.begin(), scored.end(), []( auto const& p ) { return p.positive; } ) )
    {
      auto const r = classify( scored, select_threshold( scored ) );
      log.f1 = r.f1;
      log.auc = r.auc;
    }
  }
  ++epoch_;
  return log;
}

grad::checkpoint trainer::save() const
{
  auto ck = model_checkpoint( m_, &opt_ );
  ck.meta["epoch"] = std::to_string( epoch_ );
  return ck;
}

void trainer::restore( grad::checkpoint const& ck )
{
  grad::restore_checkpoint( ck, m_.params(), &opt_ );
  auto it = ck.meta.find( "epoch" );
  epoch_ = it == ck.meta.end() ? 0u : std::stoull( it->second );
}

train_result train_multistage( std::span<circuit_record const> train, model& m, train_config const& config, std::span<circuit_record const> validation )
{
  trainer t( m, config, train, validation );
  train_result out;
  while ( t.epoch() < t.total_epochs() )
  {
    out.curve.push_back( t.run_epoch() );
    if ( config.multistage && t.epoch() == config.epochs_stage1 )
    {
      out.stage1 = t.save();
    }
  }
  out.final_state = t.save();
  return out;
}

std::string metrics_csv( std::span<epoch_log const> curve )
{
  std::string out = "epoch,stage,L_prob,L_rc,L_func,PE,F1,AUC\n";
  char buf[512];
  for ( auto const& e : curve )
  {
    std::snprintf( buf, sizeof( buf ), "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.stage, e.l_prob, e.l_rc, e.l_func, e.pe, e.f1, e.auc );
    out += buf;
  }
  return out;
}

std::string report_json( eval_report const& r )
{
  nlohmann::ordered_json j;
  auto num = []( double v ) { return std::isfinite( v ) ? nlohmann::ordered_json( v ) : nlohmann::ordered_json( nullptr ); };
  j["pe"] = num( r.pe );
  j["recall"] = num( r.recall );
  j["precision"] = num( r.precision );
  j["f1"] = num( r.f1 );
  j["auc"] = num( r.auc );
  j["threshold"] = num( r.threshold );
  j["tp"] = r.tp;
  j["tn"] = r.tn;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  return j.dump( 2 ) + "\n";
}

} // namespace gatekit
