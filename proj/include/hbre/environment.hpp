#pragma once

// I.i.d. random environments xi = (xi_0, xi_1, ...).
//
// An Environment never stores sampled laws: law_at(i) is a pure function of
// (base seed, replicate index, shift offset + i), so environments are cheap to
// copy, safe to share between threads, and shift(env, k).law_at(i) is
// bit-identical to env.law_at(i + k).

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hbre/errors.hpp"
#include "hbre/offspring_law.hpp"
#include "hbre/rng.hpp"

namespace hbre {

/// Description of one offspring law before validation.
struct LawSpec {
  Family family = Family::SibuyaLike;
  double alpha = 0.5;
  std::vector<double> weights;

  static LawSpec sibuya(double alpha) { return {Family::SibuyaLike, alpha, {}}; }
  static LawSpec pmf(std::vector<double> weights) { return {Family::FinitePmf, 0.0, std::move(weights)}; }
};

struct SibuyaUniformSpec {
  double alpha_min = 0.2;
  double alpha_max = 0.7;
};

struct FiniteMixtureSpec {
  std::vector<LawSpec> laws;
  std::vector<double> probs;
};

struct ModelSpec {
  std::variant<SibuyaUniformSpec, FiniteMixtureSpec> kind;
  std::uint64_t base_seed = 0;
  AssumptionPolicy policy = AssumptionPolicy::Enforce;
};

inline nlohmann::json law_to_json(const OffspringLaw& law) {
  if (law.family() == Family::SibuyaLike) return {{"family", "sibuya"}, {"alpha", law.alpha()}};
  auto w = law.weights();
  return {{"family", "finite_pmf"}, {"weights", std::vector<double>(w.begin(), w.end())}};
}

/// Validated law of the environment sequence.
class EnvironmentModel {
 public:
  struct SibuyaUniform {
    double alpha_min;
    double alpha_max;
  };
  struct FiniteMixture {
    std::vector<OffspringLaw> laws;
    std::vector<double> probs;
    std::vector<double> cumulative;
  };

  static constexpr double kProbSumTolerance = 1e-12;

  static EnvironmentModel build(const ModelSpec& spec) {
    EnvironmentModel model;
    model.base_seed_ = spec.base_seed;
    model.policy_ = spec.policy;
    if (auto* s = std::get_if<SibuyaUniformSpec>(&spec.kind)) {
      if (!(s->alpha_min > 0.0)) throw ValidationError("alpha_min must be > 0");
      if (!(s->alpha_max < 1.0)) throw ValidationError("alpha must be < 1 (alpha_max = " + fmt(s->alpha_max) + ")");
      if (!(s->alpha_min <= s->alpha_max)) throw ValidationError("alpha_min must not exceed alpha_max");
      model.kind_ = SibuyaUniform{s->alpha_min, s->alpha_max};
      return model;
    }
    const auto& m = std::get<FiniteMixtureSpec>(spec.kind);
    if (m.laws.empty()) throw ValidationError("mixture needs at least one law");
    if (m.laws.size() != m.probs.size()) throw ValidationError("mixture laws and probs differ in length");
    FiniteMixture mix;
    double total = 0.0;
    for (std::size_t i = 0; i < m.laws.size(); ++i) {
      const double p = m.probs[i];
      if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("mixture probabilities must be nonnegative");
      total += p;
      try {
        const LawSpec& ls = m.laws[i];
        mix.laws.push_back(ls.family == Family::SibuyaLike ? OffspringLaw::sibuya(ls.alpha)
                                                           : OffspringLaw::finite_pmf(ls.weights, spec.policy));
      } catch (const ValidationError& e) {
        throw ValidationError("mixture law " + std::to_string(i) + ": " + e.what());
      }
      mix.cumulative.push_back(total);
    }
    if (std::fabs(total - 1.0) > kProbSumTolerance) throw ValidationError("mixture probabilities must sum to 1");
    mix.cumulative.back() = 1.0;
    mix.probs = m.probs;
    model.kind_ = std::move(mix);
    return model;
  }

  std::uint64_t base_seed() const noexcept { return base_seed_; }
  AssumptionPolicy policy() const noexcept { return policy_; }
  bool is_sibuya_uniform() const noexcept { return std::holds_alternative<SibuyaUniform>(kind_); }
  const SibuyaUniform& sibuya_uniform() const { return std::get<SibuyaUniform>(kind_); }
  const FiniteMixture& mixture() const { return std::get<FiniteMixture>(kind_); }

  /// Every law the model can produce.
  bool satisfies_a1() const {
    if (is_sibuya_uniform()) return true;
    for (const auto& law : mixture().laws) {
      if (!law.satisfies_a1()) return false;
    }
    return true;
  }

  /// The law at an absolute position of a replicate's environment.
  OffspringLaw draw_law(std::uint64_t replicate, std::uint64_t position) const {
    const double u = bits_to_unit(derive_seed(
        {base_seed_, replicate, position, static_cast<std::uint64_t>(StreamPurpose::Environment)}));
    if (auto* s = std::get_if<SibuyaUniform>(&kind_)) {
      return OffspringLaw::sibuya(s->alpha_min + (s->alpha_max - s->alpha_min) * u);
    }
    const auto& mix = std::get<FiniteMixture>(kind_);
    std::size_t i = 0;
    while (i + 1 < mix.cumulative.size() && u >= mix.cumulative[i]) ++i;
    return mix.laws[i];
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    if (auto* s = std::get_if<SibuyaUniform>(&kind_)) {
      j = {{"kind", "sibuya_uniform"}, {"alpha_min", s->alpha_min}, {"alpha_max", s->alpha_max}};
    } else {
      const auto& mix = std::get<FiniteMixture>(kind_);
      nlohmann::json laws = nlohmann::json::array();
      for (const auto& law : mix.laws) laws.push_back(law_to_json(law));
      j = {{"kind", "finite_mixture"}, {"laws", laws}, {"probs", mix.probs}};
    }
    j["assumptions"] = policy_ == AssumptionPolicy::Enforce ? "enforce" : "relaxed";
    return j;
  }

 private:
  static std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
  }

  std::variant<SibuyaUniform, FiniteMixture> kind_;
  std::uint64_t base_seed_ = 0;
  AssumptionPolicy policy_ = AssumptionPolicy::Enforce;
};

inline EnvironmentModel build_model(const ModelSpec& spec) { return EnvironmentModel::build(spec); }

/// One realized environment sequence, viewed from a shift offset.
class Environment {
 public:
  Environment(std::shared_ptr<const EnvironmentModel> model, std::uint64_t replicate, std::uint64_t offset = 0)
      : model_(std::move(model)), replicate_(replicate), offset_(offset) {
    if (!model_) throw ValidationError("environment requires a model");
  }

  OffspringLaw law_at(std::uint64_t i) const { return model_->draw_law(replicate_, offset_ + i); }

  /// theta^k
  Environment shift(std::uint64_t k) const { return Environment(model_, replicate_, offset_ + k); }

  std::uint64_t replicate() const noexcept { return replicate_; }
  std::uint64_t offset() const noexcept { return offset_; }
  const EnvironmentModel& model() const noexcept { return *model_; }
  const std::shared_ptr<const EnvironmentModel>& model_ptr() const noexcept { return model_; }

  /// Laws at positions 0..n-1.
  std::vector<OffspringLaw> prefix(std::size_t n) const {
    std::vector<OffspringLaw> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(law_at(i));
    return out;
  }

  /// {model, base_seed, replicate_index, shift_offset, realized: [...]} for positions 0..n-1.
  nlohmann::json record(std::size_t generations) const {
    nlohmann::json realized = nlohmann::json::array();
    for (std::size_t i = 0; i < generations; ++i) {
      auto entry = law_to_json(law_at(i));
      entry["position"] = offset_ + i;
      realized.push_back(std::move(entry));
    }
    return {{"model", model_->to_json()},
            {"base_seed", model_->base_seed()},
            {"replicate_index", replicate_},
            {"shift_offset", offset_},
            {"realized", std::move(realized)}};
  }

 private:
  std::shared_ptr<const EnvironmentModel> model_;
  std::uint64_t replicate_;
  std::uint64_t offset_;
};

inline Environment sample_environment(std::shared_ptr<const EnvironmentModel> model, std::uint64_t replicate_index) {
  return Environment(std::move(model), replicate_index, 0);
}

inline Environment sample_environment(const EnvironmentModel& model, std::uint64_t replicate_index) {
  return sample_environment(std::make_shared<const EnvironmentModel>(model), replicate_index);
}

inline Environment shift(const Environment& env, std::uint64_t k) { return env.shift(k); }

/// Constant environment: every generation uses `law`. Convenience for tests and probes.
inline Environment constant_environment(const OffspringLaw& law, std::uint64_t base_seed = 0) {
  FiniteMixtureSpec mix;
  if (law.family() == Family::SibuyaLike) {
    mix.laws.push_back(LawSpec::sibuya(law.alpha()));
  } else {
    auto w = law.weights();
    mix.laws.push_back(LawSpec::pmf({w.begin(), w.end()}));
  }
  mix.probs = {1.0};
  const auto policy = law.satisfies_a1() && !law.is_degenerate_identity() ? AssumptionPolicy::Enforce
                                                                          : AssumptionPolicy::Relaxed;
  return sample_environment(build_model({mix, base_seed, policy}), 0);
}

}  // namespace hbre
