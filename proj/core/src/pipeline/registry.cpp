#include "casgen/pipeline/registry.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace casgen::pipeline {

void CheckpointRegistry::add(diffusion::Component c, int epoch, const std::string& path,
                             const std::string& note) {
  if (epoch < 1) throw std::invalid_argument("checkpoint epoch must be >= 1");
  const auto key = std::make_pair(static_cast<int>(c), epoch);
  if (paths_.count(key))
    throw std::logic_error("checkpoint already registered for epoch " + std::to_string(epoch));
  paths_[key] = path;
  log_.push_back(to_string(c) + " epoch " + std::to_string(epoch) + " -> " + path +
                 (note.empty() ? "" : " (" + note + ")"));
}

bool CheckpointRegistry::has(diffusion::Component c, int epoch) const {
  return paths_.count({static_cast<int>(c), epoch}) > 0;
}

const std::string& CheckpointRegistry::resolve(diffusion::Component c, int epoch) const {
  const auto it = paths_.find({static_cast<int>(c), epoch});
  if (it == paths_.end())
    throw std::out_of_range("no " + to_string(c) + " checkpoint for epoch " +
                            std::to_string(epoch));
  return it->second;
}

int CheckpointRegistry::max_epoch(diffusion::Component c) const {
  int best = 0;
  for (const auto& [key, _] : paths_)
    if (key.first == static_cast<int>(c)) best = std::max(best, key.second);
  return best;
}

void CheckpointRegistry::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write registry: " + path);
  for (const auto& [key, p] : paths_)
    out << to_string(static_cast<diffusion::Component>(key.first)) << "\t" << key.second << "\t"
        << p << "\n";
}

CheckpointRegistry CheckpointRegistry::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read registry: " + path);
  CheckpointRegistry reg;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string comp, p;
    int epoch = 0;
    if (!std::getline(row, comp, '\t') || !(row >> epoch) || !row.ignore(1) ||
        !std::getline(row, p))
      throw std::runtime_error("malformed registry line: " + line);
    reg.add(diffusion::component_from_string(comp), epoch, p, "loaded");
  }
  return reg;
}

}  // namespace casgen::pipeline
