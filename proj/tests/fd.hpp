// Central finite-difference gradient check shared by the grad and model suites.

#pragma once

#include "gatekit/grad.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace gatekit::fd
{

struct report
{
  std::size_t checked{ 0 };
  std::size_t failed{ 0 };
  double worst{ 0.0 };
  std::string worst_where;
};

/* relative error with a floor so that gradients that are both ~0 compare as equal */
inline double rel_err( double analytic, double numeric, double floor = 1e-6 )
{
  return std::abs( analytic - numeric ) / std::max( { std::abs( analytic ), std::abs( numeric ), floor } );
}

/* compares backward() against central differences with step h for every scalar of every parameter */
inline report check( std::vector<grad::tensor> params, std::function<grad::tensor()> const& loss_fn, double tol = 1e-4, double h = 1e-5 )
{
  for ( auto& p : params )
  {
    p.zero_grad();
  }
  grad::backward( loss_fn() );
  report r;
  for ( std::size_t k = 0; k < params.size(); ++k )
  {
    auto& p = params[k];
    grad::matrix const analytic = p.grad();
    auto& v = p.mutable_value();
    for ( Eigen::Index e = 0; e < v.size(); ++e )
    {
      auto const orig = v.data()[e];
      v.data()[e] = orig + h;
      auto const up = loss_fn().item();
      v.data()[e] = orig - h;
      auto const down = loss_fn().item();
      v.data()[e] = orig;
      auto const numeric = ( up - down ) / ( 2.0 * h );
      auto const err = rel_err( analytic.data()[e], numeric );
      ++r.checked;
      if ( err > tol )
      {
        ++r.failed;
      }
      if ( err > r.worst )
      {
        r.worst = err;
        r.worst_where = "param " + std::to_string( k ) + " elem " + std::to_string( e );
      }
    }
  }
  return r;
}

} // namespace gatekit::fd
