#include "casgen/hpo/study.hpp"

#include "casgen/hpo/hyperband.hpp"
#include "casgen/hpo/tpe.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>
#include <stdexcept>

namespace casgen::hpo {

using nlohmann::json;

std::string to_string(TrialState s) {
  switch (s) {
    case TrialState::running: return "running";
    case TrialState::complete: return "complete";
    case TrialState::pruned: return "pruned";
    case TrialState::failed: return "failed";
  }
  throw std::logic_error("bad trial state");
}

TrialState trial_state_from_string(const std::string& s) {
  if (s == "running") return TrialState::running;
  if (s == "complete") return TrialState::complete;
  if (s == "pruned") return TrialState::pruned;
  if (s == "failed") return TrialState::failed;
  throw std::invalid_argument("unknown trial state: " + s);
}

double Trial::value_at(int step) const {
  double v = std::nan("");
  for (const auto& [s, val] : intermediate) {
    if (s > step) break;
    v = val;
  }
  return v;
}

Study::Study(SearchSpace space, std::uint64_t seed, TpeSettings tpe, HyperbandSettings hyperband,
             std::string journal_path)
    : space_(std::move(space)),
      seed_(seed),
      tpe_(tpe),
      hyperband_(hyperband),
      journal_path_(std::move(journal_path)) {
  space_.validate();
  if (hyperband_.eta < 2) throw std::invalid_argument("hyperband eta must be >= 2");
  if (hyperband_.min_resource < 1 || hyperband_.max_resource < hyperband_.min_resource)
    throw std::invalid_argument("bad hyperband resource bounds");
}

void Study::append_journal(int trial_id, const std::string& event,
                           const std::string& payload_json) {
  if (journal_path_.empty() || !journaling_) return;
  json rec;
  rec["trial"] = trial_id;
  rec["event"] = event;
  rec["payload"] = json::parse(payload_json);
  rec["ts"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
  std::ofstream out(journal_path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to journal: " + journal_path_);
  out << rec.dump() << "\n";
}

int Study::begin_trial() {
  // The suggestion RNG is derived from the trial index, so a replayed study
  // continues the exact same stream.
  nn::Rng rng(nn::derive_seed(seed_, 0x747065ULL, static_cast<std::uint64_t>(trials_.size())));
  return begin_trial(tpe_suggest(space_, completed_trials(), tpe_, rng));
}

int Study::begin_trial(const Assignment& params) {
  if (!space_.contains(params)) throw std::invalid_argument("assignment outside search space");
  Trial t;
  t.id = static_cast<int>(trials_.size());
  t.params = params;
  trials_.push_back(std::move(t));
  append_journal(trials_.back().id, "start", json{{"params", params}}.dump());
  return trials_.back().id;
}

Trial& Study::running_trial(int id) {
  if (id < 0 || id >= static_cast<int>(trials_.size()))
    throw std::out_of_range("no such trial id");
  Trial& t = trials_[id];
  if (t.state != TrialState::running)
    throw std::logic_error("trial " + std::to_string(id) + " is not running");
  return t;
}

const Trial& Study::trial(int id) const {
  if (id < 0 || id >= static_cast<int>(trials_.size()))
    throw std::out_of_range("no such trial id");
  return trials_[id];
}

void Study::report_intermediate(int trial_id, int step, double value) {
  Trial& t = running_trial(trial_id);
  if (step < 1) throw std::invalid_argument("resource step must be >= 1");
  if (step <= t.last_step())
    throw std::invalid_argument("intermediate steps must be strictly increasing");
  t.intermediate.emplace_back(step, value);
  append_journal(trial_id, "intermediate", json{{"step", step}, {"value", value}}.dump());
}

bool Study::should_prune(int trial_id) const {
  const Trial& t = trial(trial_id);
  if (t.intermediate.empty())
    throw std::logic_error("should_prune needs at least one intermediate value");
  return hyperband_should_prune(hyperband_, trials_, t);
}

void Study::complete_trial(int trial_id, double objective) {
  if (std::isnan(objective)) throw std::invalid_argument("objective must be a number");
  Trial& t = running_trial(trial_id);
  t.objective = objective;
  t.state = TrialState::complete;
  append_journal(trial_id, "complete", json{{"objective", objective}}.dump());
}

void Study::prune_trial(int trial_id) {
  Trial& t = running_trial(trial_id);
  if (t.intermediate.empty())
    throw std::logic_error("pruned trials need at least one intermediate value");
  t.state = TrialState::pruned;
  append_journal(trial_id, "pruned", "{}");
}

void Study::fail_trial(int trial_id) {
  Trial& t = running_trial(trial_id);
  t.state = TrialState::failed;
  append_journal(trial_id, "failed", "{}");
}

std::vector<Trial> Study::completed_trials() const {
  std::vector<Trial> out;
  for (const auto& t : trials_)
    if (t.state == TrialState::complete) out.push_back(t);
  return out;
}

const Trial& Study::best_trial() const {
  const Trial* best = nullptr;
  for (const auto& t : trials_) {
    if (t.state != TrialState::complete) continue;
    if (!best || t.objective > best->objective) best = &t;
  }
  if (!best) throw std::logic_error("study has no complete trial");
  return *best;
}

Study Study::replay(std::string journal_path, SearchSpace space, std::uint64_t seed,
                    TpeSettings tpe, HyperbandSettings hyperband) {
  std::ifstream in(journal_path);
  if (!in) throw std::runtime_error("cannot open journal: " + journal_path);
  Study study(std::move(space), seed, tpe, hyperband, journal_path);
  study.journaling_ = false;  // do not re-append the events being replayed
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    const int id = rec.at("trial").get<int>();
    const std::string event = rec.at("event").get<std::string>();
    const json& payload = rec.at("payload");
    if (event == "start") {
      int got = study.begin_trial(payload.at("params").get<Assignment>());
      if (got != id) throw std::runtime_error("journal trial ids out of order");
    } else if (event == "intermediate") {
      study.report_intermediate(id, payload.at("step").get<int>(),
                                payload.at("value").get<double>());
    } else if (event == "complete") {
      study.complete_trial(id, payload.at("objective").get<double>());
    } else if (event == "pruned") {
      study.prune_trial(id);
    } else if (event == "failed") {
      study.fail_trial(id);
    } else {
      throw std::runtime_error("unknown journal event: " + event);
    }
  }
  study.journaling_ = true;
  return study;
}

}  // namespace casgen::hpo
