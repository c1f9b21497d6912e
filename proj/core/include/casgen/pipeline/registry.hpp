#pragma once

#include "casgen/diffusion/checkpoint.hpp"

#include <map>
#include <string>
#include <vector>

namespace casgen::pipeline {

/// Maps (component, epoch) to checkpoint paths and keeps an append-only
/// provenance log. Persistable as a text file for resumable runs.
class CheckpointRegistry {
 public:
  void add(diffusion::Component c, int epoch, const std::string& path, const std::string& note);
  bool has(diffusion::Component c, int epoch) const;
  const std::string& resolve(diffusion::Component c, int epoch) const;
  int max_epoch(diffusion::Component c) const;  // 0 when empty

  const std::vector<std::string>& log() const { return log_; }

  void save(const std::string& path) const;
  static CheckpointRegistry load(const std::string& path);

 private:
  std::map<std::pair<int, int>, std::string> paths_;
  std::vector<std::string> log_;
};

}  // namespace casgen::pipeline
