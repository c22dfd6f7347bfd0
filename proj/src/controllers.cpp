#include "orcsmc/controllers.hpp"

#include "orcsmc/hash.hpp"

#include <algorithm>

namespace orcsmc {

CsmcResult csmc(const ModelSpec& model, const std::vector<Observation>& ys, const CsmcConfig& config,
                const StreamFactory& streams) {
  require(!ys.empty(), "csmc: need at least one observation");
  require(config.iterations >= 1, "csmc: K must be >= 1");
  const int T = static_cast<int>(ys.size());
  CsmcResult out;
  out.twists.assign(static_cast<std::size_t>(T), TwistParams::unit(model.dim()));

  for (int k = 1; k <= config.iterations; ++k) {
    try {
      out.last_pass = run_filter(model, out.twists, ys, config.n_particles, config.filter,
                                 streams.child(static_cast<std::uint64_t>(k)), true);
    } catch (const DegenerateWeightsError& e) {
      throw DegenerateWeightsError(e.time(), "csmc iteration " + std::to_string(k) + ": " + e.what());
    }
    out.apf_calls += static_cast<std::size_t>(T);
    TwistParams next = TwistParams::unit(model.dim());
    for (int t = T; t >= 1; --t) {
      const auto idx = static_cast<std::size_t>(t);
      TwistFit fit = learn_psi(model, next, out.last_pass.systems[idx], ys[idx - 1], config.reg);
      ++out.learn_calls;
      if (fit.degenerate) ++out.degenerate_fits;
      out.twists[idx - 1] = fit.psi;
      next = std::move(fit.psi);
    }
  }
  out.log_z = out.last_pass.log_z;
  return out;
}

Orcsmc::Orcsmc(const ModelSpec& model, OrcsmcConfig config, StreamFactory learning, StreamFactory estimation)
    : model_(&model), config_(std::move(config)), learning_(learning), estimation_(estimation) {
  require(config_.lag >= 1, "Orcsmc: lag must be >= 1");
  require(config_.iterations >= 0, "Orcsmc: K must be >= 0");
  require(config_.n_particles >= 1, "Orcsmc: N must be >= 1");
  const ParticleSystem initial = ParticleSystem::initial(model.dim(), config_.n_particles);
  slots_.push_back(WindowSlot{0, Observation(), TwistParams::unit(model.dim()), initial, initial});
}

int Orcsmc::window_start() const noexcept { return std::max(1, t_ - config_.lag + 1); }

const WindowSlot& Orcsmc::slot(int t) const {
  require(!slots_.empty() && t >= slots_.front().t && t <= slots_.back().t, "Orcsmc: time not retained");
  return slots_[static_cast<std::size_t>(t - slots_.front().t)];
}

WindowSlot& Orcsmc::mutable_slot(int t) { return const_cast<WindowSlot&>(std::as_const(*this).slot(t)); }

bool Orcsmc::estimation_wanted(int t) const {
  return config_.output_mode == OutputMode::kAlwaysOverwrite || config_.output_times.count(t) > 0 ||
         (config_.horizon > 0 && t == config_.horizon);
}

std::optional<OnlineOutput> Orcsmc::step(const Observation& y) {
  validate_observation(*model_, y);
  const int t = ++t_;
  const int t0 = window_start();
  const int lag = config_.lag;
  const std::size_t apf_before = apf_total_;
  const std::size_t learn_before = learn_total_;

  if (!config_.keep_all) {
    while (slots_.front().t < t0 - 1) slots_.pop_front();
  }

  // Learning filter: extend with psi_t = 1.
  slots_.push_back(WindowSlot{t, y, TwistParams::unit(model_->dim()), {}, {}});
  const StreamFactory learn_t = learning_.child(static_cast<std::uint64_t>(t));
  {
    Rng rng = learn_t.child(0).at(static_cast<std::uint64_t>(t));
    WindowSlot& cur = mutable_slot(t);
    cur.learning = psi_apf_step(*model_, cur.psi, slot(t - 1).learning, y, config_.filter, rng);
    ++apf_total_;
  }

  for (int k = 1; k <= config_.iterations; ++k) {
    for (int s = t; s >= t0; --s) {
      WindowSlot& cur = mutable_slot(s);
      const TwistParams unit = TwistParams::unit(model_->dim());
      const TwistParams& next = s == t ? unit : slot(s + 1).psi;
      TwistFit fit = learn_psi(*model_, next, cur.learning, cur.y, config_.reg);
      if (fit.degenerate) ++degenerate_fits_;
      cur.psi = std::move(fit.psi);
      ++learn_total_;
    }
    const StreamFactory learn_k = learn_t.child(static_cast<std::uint64_t>(k));
    for (int s = t0; s <= t; ++s) {
      Rng rng = learn_k.at(static_cast<std::uint64_t>(s));
      WindowSlot& cur = mutable_slot(s);
      try {
        cur.learning = psi_apf_step(*model_, cur.psi, slot(s - 1).learning, cur.y, config_.filter, rng);
      } catch (const DegenerateWeightsError& e) {
        throw DegenerateWeightsError(t, "learning filter, iteration " + std::to_string(k) + ": " + e.what());
      }
      ++apf_total_;
    }
  }

  // Estimation filter from the frozen boundary P_{t0-1}.
  int first = t0;
  int last = t;
  if (!estimation_wanted(t)) {
    if (t < lag) {
      last = first - 1;
    } else {
      last = t0;
    }
  }
  for (int s = first; s <= last; ++s) {
    Rng rng = estimation_.at(static_cast<std::uint64_t>(s));
    WindowSlot& cur = mutable_slot(s);
    cur.estimation = psi_apf_step(*model_, cur.psi, slot(s - 1).estimation, cur.y, config_.filter, rng);
    ++apf_total_;
  }

  if (last != t) return std::nullopt;
  const ParticleSystem& est = slot(t).estimation;
  OnlineOutput out;
  out.t = t;
  out.log_z = est.log_z;
  out.mean = weighted_mean(est);
  out.covariance = weighted_covariance(est);
  out.ess = ess(est.log_weights);
  out.ess_before_resampling = est.ess_before_resampling;
  out.resampled = est.resampled;
  out.apf_calls = apf_total_ - apf_before;
  out.learn_calls = learn_total_ - learn_before;
  out.retained_systems = retained_systems();
  return out;
}

std::uint64_t Orcsmc::checksum_through(int last) const {
  Fnv1a h;
  auto matrix = [&h](const auto& m) { h.update(m.data(), sizeof(*m.data()) * static_cast<std::size_t>(m.size())); };
  for (const WindowSlot& s : slots_) {
    if (s.t > last) break;
    h.update(&s.t, sizeof(s.t));
    matrix(s.psi.a);
    matrix(s.psi.b);
    h.update(&s.psi.c, sizeof(s.psi.c));
    for (const ParticleSystem* p : {&s.learning, &s.estimation}) {
      matrix(p->positions);
      matrix(p->log_weights);
      matrix(p->ancestors);
      h.update(&p->log_z, sizeof(p->log_z));
    }
  }
  return h.digest();
}

PathSet Orcsmc::estimation_paths() const {
  require(t_ >= 1, "Orcsmc: no time step processed yet");
  LineageBuffer buffer;
  for (const WindowSlot& s : slots_)
    if (s.t >= 1) buffer.push(s.estimation);
  return reconstruct_paths(buffer, slot(t_).estimation);
}

OrcsmcRun run_orcsmc(const ModelSpec& model, const std::vector<Observation>& ys, const OrcsmcConfig& config,
                     const StreamFactory& learning, const StreamFactory& estimation, const OutputSink& sink) {
  require(!ys.empty(), "run_orcsmc: need at least one observation");
  OrcsmcConfig cfg = config;
  if (cfg.horizon == 0) cfg.horizon = static_cast<int>(ys.size());
  Orcsmc controller(model, cfg, learning, estimation);
  OrcsmcRun run;
  for (const Observation& y : ys) {
    auto out = controller.step(y);
    run.max_retained_systems = std::max(run.max_retained_systems, controller.retained_systems());
    if (out) {
      if (sink) sink(*out);
      run.outputs.push_back(std::move(*out));
    }
  }
  run.log_z = controller.slot(controller.time()).estimation.log_z;
  run.paths = controller.estimation_paths();
  run.apf_calls = controller.total_apf_calls();
  run.learn_calls = controller.total_learn_calls();
  return run;
}

}  // namespace orcsmc
