#pragma once

#include "casgen/hpo/space.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace casgen::hpo {

enum class TrialState { running, complete, pruned, failed };

std::string to_string(TrialState s);
TrialState trial_state_from_string(const std::string& s);

struct Trial {
  int id = -1;
  Assignment params;
  TrialState state = TrialState::running;
  std::vector<std::pair<int, double>> intermediate;  // (resource step, proxy value)
  double objective = std::nan("");

  int last_step() const { return intermediate.empty() ? -1 : intermediate.back().first; }
  /// Proxy value at the largest reported step <= `step`, or NaN if none.
  double value_at(int step) const;
};

struct TpeSettings {
  int n_startup = 10;
  double gamma = 0.25;
  int n_candidates = 24;
};

struct HyperbandSettings {
  int eta = 3;
  int min_resource = 1;
  int max_resource = 100;
};

/// Maximizing study over a fixed space.  Every state transition is appended to
/// a newline-delimited JSON journal (one record per event: trial id, event
/// name, payload, timestamp) so a crashed run can be replayed.
class Study {
 public:
  Study(SearchSpace space, std::uint64_t seed, TpeSettings tpe = {},
        HyperbandSettings hyperband = {}, std::string journal_path = "");

  /// Suggest parameters and open a new running trial; returns its id.
  int begin_trial();
  /// Open a running trial with caller-chosen parameters (used by replay and tests).
  int begin_trial(const Assignment& params);

  void report_intermediate(int trial_id, int step, double value);
  bool should_prune(int trial_id) const;

  void complete_trial(int trial_id, double objective);
  void prune_trial(int trial_id);
  void fail_trial(int trial_id);

  const SearchSpace& space() const { return space_; }
  const std::vector<Trial>& trials() const { return trials_; }
  const Trial& trial(int id) const;
  std::vector<Trial> completed_trials() const;
  const Trial& best_trial() const;  // max objective, tie -> lowest id
  const TpeSettings& tpe_settings() const { return tpe_; }
  const HyperbandSettings& hyperband_settings() const { return hyperband_; }
  std::uint64_t seed() const { return seed_; }

  /// Rebuild a study from its journal.  The journal stays attached, so the
  /// returned study may keep appending to it.
  static Study replay(std::string journal_path, SearchSpace space, std::uint64_t seed,
                      TpeSettings tpe = {}, HyperbandSettings hyperband = {});

 private:
  Trial& running_trial(int id);
  void append_journal(int trial_id, const std::string& event, const std::string& payload_json);

  SearchSpace space_;
  std::uint64_t seed_ = 0;
  TpeSettings tpe_;
  HyperbandSettings hyperband_;
  std::vector<Trial> trials_;
  std::string journal_path_;
  bool journaling_ = true;
};

}  // namespace casgen::hpo
