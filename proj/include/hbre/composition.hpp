#pragma once

// n-fold compositions of the per-generation transforms along an environment.
//
//   k_n(xi, s) = k_{xi_0}(k_{xi_1}(... k_{xi_{n-1}}(s)))
//   h_n(xi, s) = h_{xi_{n-1}}(... h_{xi_0}(s))
//
// h_n shrinks double-exponentially for heavy-tailed laws, so results stay in
// log coordinate throughout.

#include <cmath>
#include <cstddef>
#include <exception>
#include <vector>

#include "hbre/environment.hpp"
#include "hbre/errors.hpp"
#include "hbre/tail_scalar.hpp"

namespace hbre {

namespace detail {

template <class F>
auto at_index(std::size_t index, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const CompositionError&) {
    throw;
  } catch (const std::exception& e) {
    throw CompositionError(e.what(), index);
  }
}

}  // namespace detail

inline TailScalar compose_k_n(const Environment& env, std::size_t n, TailScalar s) {
  for (std::size_t i = n; i-- > 0;) {
    s = detail::at_index(i, [&] { return env.law_at(i).k_transform(s); });
  }
  return s;
}

inline TailScalar compose_h_n(const Environment& env, std::size_t n, TailScalar s) {
  for (std::size_t i = 0; i < n; ++i) {
    s = detail::at_index(i, [&] { return env.law_at(i).h_transform(s); });
  }
  return s;
}

/// h_0(s), h_1(s), ..., h_n(s).
inline std::vector<TailScalar> h_path(const Environment& env, std::size_t n, TailScalar s) {
  std::vector<TailScalar> out;
  out.reserve(n + 1);
  out.push_back(s);
  for (std::size_t i = 0; i < n; ++i) {
    s = detail::at_index(i, [&] { return env.law_at(i).h_transform(s); });
    out.push_back(s);
  }
  return out;
}

/// Ratios h_{n+1}(xi, s) / h_n(theta xi, s) for n = 1..n_max.
inline std::vector<double> estimate_d(const Environment& env, TailScalar s, std::size_t n_max) {
  if (n_max < 1) throw ValidationError("estimate_d requires n_max >= 1");
  const auto own = h_path(env, n_max + 1, s);
  const auto shifted = h_path(env.shift(1), n_max, s);
  std::vector<double> ratios;
  ratios.reserve(n_max);
  for (std::size_t n = 1; n <= n_max; ++n) ratios.push_back(std::exp(own[n + 1].log() - shifted[n].log()));
  return ratios;
}

}  // namespace hbre
