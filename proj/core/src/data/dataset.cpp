#include "casgen/data/dataset.hpp"

#include "casgen/data/png_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace casgen::data {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }
std::string to_string(Provenance p) { return p == Provenance::real ? "real" : "synthetic"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + s);
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "real") return Provenance::real;
  if (s == "synthetic") return Provenance::synthetic;
  throw std::invalid_argument("unknown provenance: " + s);
}

long ClassDistribution::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0L);
}

ClassDistribution class_histogram(const LabeledDataset& ds) {
  ClassDistribution d;
  d.counts.assign(static_cast<size_t>(ds.num_classes), 0);
  for (int label : ds.labels) {
    if (label < 0 || label >= ds.num_classes)
      throw std::out_of_range("class_histogram: label out of range");
    ++d.counts[static_cast<size_t>(label)];
  }
  return d;
}

void PreprocessConfig::validate() const {
  if (target_resolution < 8 || target_resolution % 2 != 0)
    throw std::invalid_argument("PreprocessConfig: target_resolution must be >= 8 and even");
}

ClassDistribution stratified_counts(long n_total, const ClassDistribution& dist) {
  if (n_total <= 0) throw std::invalid_argument("stratified_counts: n_total <= 0");
  const size_t c = dist.counts.size();
  if (c == 0) throw std::invalid_argument("stratified_counts: empty distribution");
  const double total_w = static_cast<double>(dist.total());
  if (total_w <= 0) throw std::invalid_argument("stratified_counts: zero-mass distribution");

  ClassDistribution out;
  out.counts.assign(c, 0);
  std::vector<double> frac(c);
  long assigned = 0;
  for (size_t i = 0; i < c; ++i) {
    const double quota = n_total * static_cast<double>(dist.counts[i]) / total_w;
    out.counts[i] = static_cast<long>(quota);
    frac[i] = quota - static_cast<double>(out.counts[i]);
    assigned += out.counts[i];
  }
  // Largest remainder, ties by ascending class id.
  std::vector<size_t> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return frac[a] > frac[b]; });
  for (long r = 0; r < n_total - assigned; ++r) ++out.counts[order[static_cast<size_t>(r) % c]];
  return out;
}

ClassDistribution stratified_counts_uniform(long n_total, int num_classes) {
  if (num_classes <= 0) throw std::invalid_argument("stratified_counts_uniform: no classes");
  if (n_total < num_classes)
    throw std::invalid_argument("stratified_counts_uniform: n_total < num_classes");
  ClassDistribution dist;
  dist.counts.assign(static_cast<size_t>(num_classes), 1);
  return stratified_counts(n_total, dist);
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const size_t sep = line.find(':');
    if (sep == std::string::npos) throw std::runtime_error("malformed manifest line: " + line);
    std::string key = line.substr(0, sep);
    std::string value = line.substr(sep + 1);
    while (!value.empty() && value.front() == ' ') value.erase(value.begin());
    kv[key] = value;
  }
  return kv;
}

void write_manifest(const std::string& path, const std::map<std::string, std::string>& kv,
                    const std::vector<std::string>& key_order) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  std::vector<std::string> done;
  for (const auto& k : key_order) {
    auto it = kv.find(k);
    if (it == kv.end()) continue;
    f << k << ": " << it->second << "\n";
    done.push_back(k);
  }
  for (const auto& [k, v] : kv) {
    if (std::find(done.begin(), done.end(), k) == done.end()) f << k << ": " << v << "\n";
  }
}

static std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

LabeledDataset load_dataset(const std::string& root, const PreprocessConfig& cfg) {
  cfg.validate();
  auto kv = read_manifest((fs::path(root) / "manifest").string());
  if (!kv.count("classes")) throw std::runtime_error("manifest missing 'classes': " + root);

  LabeledDataset ds;
  ds.class_names = split_csv(kv.at("classes"));
  ds.num_classes = static_cast<int>(ds.class_names.size());
  ds.split = split_from_string(kv.count("split") ? kv.at("split") : "train");
  ds.provenance = provenance_from_string(kv.count("provenance") ? kv.at("provenance") : "real");
  ds.meta = kv;

  std::map<std::string, int> class_id;
  for (int i = 0; i < ds.num_classes; ++i) class_id[ds.class_names[static_cast<size_t>(i)]] = i;

  std::vector<std::pair<std::string, int>> files;
  for (int i = 0; i < ds.num_classes; ++i) {
    const fs::path dir = fs::path(root) / ds.class_names[static_cast<size_t>(i)];
    if (!fs::is_directory(dir))
      throw std::runtime_error("missing class directory: " + dir.string());
    bool any = false;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      files.emplace_back(e.path().string(), i);
      any = true;
    }
    if (!any) throw std::runtime_error("empty class directory: " + dir.string());
  }
  std::sort(files.begin(), files.end());

  for (const auto& [path, label] : files) {
    ImageTensor raw = read_png(path);  // throws naming the file on decode failure
    ImageTensor resized = bilinear_resize(raw, cfg.target_resolution);
    ds.images.push_back(normalize_to_unit_range(resized));
    ds.labels.push_back(label);
  }
  if (ds.images.empty()) throw std::runtime_error("empty dataset: " + root);
  return ds;
}

void save_dataset(const LabeledDataset& ds, const std::string& root, bool overwrite) {
  if (ds.images.empty()) throw std::invalid_argument("save_dataset: empty dataset");
  const fs::path rp(root);
  if (fs::exists(rp) && !fs::is_empty(rp)) {
    if (!overwrite) throw std::runtime_error("save_dataset: target not empty: " + root);
    fs::remove_all(rp);
  }
  fs::create_directories(rp);

  std::vector<long> index(static_cast<size_t>(ds.num_classes), 0);
  for (const auto& name : ds.class_names) fs::create_directories(rp / name);
  for (size_t i = 0; i < ds.images.size(); ++i) {
    const int label = ds.labels[i];
    const std::string& cls = ds.class_names[static_cast<size_t>(label)];
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06ld.png", index[static_cast<size_t>(label)]++);
    write_png((rp / cls / buf).string(), denormalize_from_unit_range(ds.images[i]));
  }

  std::map<std::string, std::string> kv = ds.meta;
  std::string classes;
  for (size_t i = 0; i < ds.class_names.size(); ++i) {
    if (i) classes += ",";
    classes += ds.class_names[i];
  }
  kv["classes"] = classes;
  kv["split"] = to_string(ds.split);
  kv["provenance"] = to_string(ds.provenance);
  write_manifest((rp / "manifest").string(), kv, {"split", "classes", "provenance"});
}

void save_synthetic_dataset(const LabeledDataset& ds, const std::string& root, bool overwrite) {
  if (ds.provenance != Provenance::synthetic)
    throw std::invalid_argument("save_synthetic_dataset: provenance must be synthetic");
  save_dataset(ds, root, overwrite);
}

}  // namespace casgen::data
