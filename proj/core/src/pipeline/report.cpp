#include "casgen/pipeline/report.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace casgen::pipeline {
namespace {

namespace fs = std::filesystem;

hpo::ImportanceReport importance_from_rows(
    const std::vector<std::vector<std::string>>& rows) {
  hpo::ImportanceReport rep;
  std::map<std::string, int> index;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 3) throw std::runtime_error("malformed importance row");
    rep.stage = row[2];
    const std::string& name = row[0];
    const double frac = std::stod(row[1]);
    const auto star = name.find('*');
    if (star == std::string::npos) {
      index[name] = static_cast<int>(rep.names.size());
      rep.names.push_back(name);
      rep.individual.push_back(frac);
    } else {
      rep.pairs.emplace_back(index.at(name.substr(0, star)), index.at(name.substr(star + 1)),
                             frac);
    }
  }
  return rep;
}

}  // namespace

void write_table1_csv(const std::string& path, const std::vector<StageResult>& stages) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write table1 csv: " + path);
  out << "Stage,CAS,GenerationSeconds,DenoiserEvals\n";
  for (const auto& s : stages)
    out << "After " << s.stage << ".," << s.cas << "," << s.generation_seconds << ","
        << s.denoiser_evals << "\n";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read csv: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

void write_importance_csv(const std::string& path,
                          const std::vector<hpo::ImportanceReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write importance csv: " + path);
  out << "parameter,fraction,stage\n";
  for (const auto& rep : reports) {
    for (size_t i = 0; i < rep.names.size(); ++i)
      out << rep.names[i] << "," << rep.individual[i] << "," << rep.stage << "\n";
    for (const auto& [i, j, frac] : rep.pairs)
      out << rep.names[i] << "*" << rep.names[j] << "," << frac << "," << rep.stage << "\n";
  }
}

void write_importance_chart(const std::string& path,
                            const std::vector<hpo::ImportanceReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no importance reports");
  // Group labels: individual parameters then pairwise interactions of the
  // first report (all reports share one search space).
  const auto& base = reports.front();
  std::vector<std::string> groups = base.names;
  for (const auto& [i, j, _] : base.pairs) groups.push_back(base.names[i] + "*" + base.names[j]);

  const int bar_w = 28, gap = 14, group_gap = 36;
  const int chart_h = 220, margin = 48;
  const int group_w = static_cast<int>(reports.size()) * (bar_w + gap) + group_gap;
  const int width = margin * 2 + static_cast<int>(groups.size()) * group_w;
  const int height = chart_h + 2 * margin + 20;
  const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52"};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write chart: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin + chart_h << "\" x2=\""
      << width - margin << "\" y2=\"" << margin + chart_h << "\" stroke=\"black\"/>\n";

  for (size_t g = 0; g < groups.size(); ++g) {
    const int gx = margin + static_cast<int>(g) * group_w;
    for (size_t r = 0; r < reports.size(); ++r) {
      const auto& rep = reports[r];
      double frac = 0.0;
      if (g < rep.names.size()) {
        frac = rep.individual[g];
      } else {
        const auto& [i, j, f] = rep.pairs[g - rep.names.size()];
        frac = f;
      }
      const int h = static_cast<int>(frac * chart_h);
      const int x = gx + static_cast<int>(r) * (bar_w + gap);
      out << "<rect x=\"" << x << "\" y=\"" << margin + chart_h - h << "\" width=\"" << bar_w
          << "\" height=\"" << h << "\" fill=\"" << palette[r % 4] << "\"><title>" << rep.stage
          << " " << groups[g] << " " << frac << "</title></rect>\n";
    }
    out << "<text x=\"" << gx << "\" y=\"" << margin + chart_h + 16
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << groups[g] << "</text>\n";
  }
  for (size_t r = 0; r < reports.size(); ++r)
    out << "<rect x=\"" << margin + static_cast<int>(r) * 120 << "\" y=\"" << height - 24
        << "\" width=\"12\" height=\"12\" fill=\"" << palette[r % 4] << "\"/><text x=\""
        << margin + static_cast<int>(r) * 120 + 16 << "\" y=\"" << height - 13
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << reports[r].stage << "</text>\n";
  out << "</svg>\n";
}

std::vector<hpo::ImportanceReport> load_run_importance(const std::string& run_dir) {
  std::vector<std::string> missing;
  std::vector<hpo::ImportanceReport> reports;
  for (int stage : {2, 4}) {
    const std::string p = run_dir + "/stage" + std::to_string(stage) + "/importance.csv";
    if (!fs::exists(p)) {
      missing.push_back(p);
      continue;
    }
    reports.push_back(importance_from_rows(parse_csv(p)));
  }
  if (!missing.empty()) {
    std::string msg = "missing importance artifacts:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  return reports;
}

}  // namespace casgen::pipeline
