#include "autov/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "autov/avt.hpp"
#include "autov/error.hpp"

namespace autov {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kFormat = "autov-dataset";
constexpr int kVersion = 1;

std::string blob_name(std::size_t group, const std::string& suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "g%06zu_", group);
  return std::string(buf) + suffix + ".avt";
}

std::string at_line(const fs::path& path, std::size_t line) { return path.string() + ":" + std::to_string(line) + ": "; }

const json& field(const json& rec, const char* name, const std::string& where) {
  if (!rec.contains(name)) throw ParseError(where + "record is missing field '" + name + "'");
  return rec.at(name);
}

std::string string_field(const json& rec, const char* name, const std::string& where) {
  const json& v = field(rec, name, where);
  if (!v.is_string()) throw ParseError(where + "field '" + name + "' must be a string");
  return v.get<std::string>();
}

std::optional<double> loss_field(const json& cand, const char* name, const std::string& where) {
  if (!cand.contains(name) || cand.at(name).is_null()) return std::nullopt;
  const json& v = cand.at(name);
  double value = 0.0;
  if (v.is_number()) {
    value = v.get<double>();
  } else if (v.is_string()) {
    try {
      std::size_t used = 0;
      value = std::stod(v.get<std::string>(), &used);
      if (used != v.get<std::string>().size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(where + "field '" + name + "' is not a number");
    }
  } else {
    throw ParseError(where + "field '" + name + "' is not a number");
  }
  if (!std::isfinite(value)) throw ValidationError(where + "field '" + name + "' is not finite");
  if (value < 0.0) throw ValidationError(where + "field '" + name + "' is negative (" + v.dump() + ")");
  return value;
}

TokenMatrix load_blob(const fs::path& base, const std::string& rel, const std::string& where) {
  const fs::path p = base / rel;
  if (!fs::exists(p)) throw MissingBlobError(where + "tensor blob '" + rel + "' does not exist");
  try {
    return load_avt(p);
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  }
}

CandidateGroup parse_record(const std::string& text, const fs::path& path, std::size_t line, const DatasetDims& dims,
                            std::string& group_id_out) {
  const std::string where = at_line(path, line);
  json rec;
  try {
    rec = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(where + "malformed JSON: " + e.what());
  }
  if (!rec.is_object()) throw ParseError(where + "record must be a JSON object");

  CandidateGroup g;
  g.group_id = string_field(rec, "group_id", where);
  group_id_out = g.group_id;
  const std::string query_rel = string_field(rec, "query", where);
  const json& cands = field(rec, "candidates", where);
  if (!cands.is_array()) throw ParseError(where + "field 'candidates' must be an array");

  const fs::path base = path.parent_path();
  for (const json& c : cands) {
    if (!c.is_object()) throw ParseError(where + "each candidate must be a JSON object");
    Candidate cand;
    cand.id = string_field(c, "id", where);
    const std::string blob = string_field(c, "blob", where);
    cand.loss = loss_field(c, "loss", where);
    cand.true_loss = loss_field(c, "true_loss", where);
    cand.visual = load_blob(base, blob, where);
    g.candidates.push_back(std::move(cand));
  }
  if (rec.contains("rank") && !rec.at("rank").is_null()) {
    try {
      g.rank = rec.at("rank").get<std::vector<std::size_t>>();
    } catch (const json::exception&) {
      throw ParseError(where + "field 'rank' must be an array of indices");
    }
  }
  g.query = load_blob(base, query_rel, where);
  try {
    validate_group(g, dims);
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  }
  return g;
}

DatasetDims parse_manifest(std::istream& in, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(at_line(path, 1) + "missing dataset manifest");
  json m;
  try {
    m = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(at_line(path, 1) + "malformed manifest: " + e.what());
  }
  if (!m.is_object() || m.value("format", "") != kFormat) {
    throw FormatError(at_line(path, 1) + "not an " + kFormat + " file");
  }
  if (m.value("version", -1) != kVersion) {
    throw FormatError(at_line(path, 1) + "unsupported dataset version (expected " + std::to_string(kVersion) + ")");
  }
  DatasetDims dims;
  try {
    dims.model_dim = m.at("D").get<std::size_t>();
    dims.visual_tokens = m.at("l_v").get<std::size_t>();
    dims.text_tokens = m.at("l_t").get<std::size_t>();
  } catch (const json::exception&) {
    throw ParseError(at_line(path, 1) + "manifest needs integer fields D, l_v and l_t");
  }
  if (dims.model_dim == 0 || dims.visual_tokens == 0 || dims.text_tokens == 0) {
    throw ValidationError(at_line(path, 1) + "manifest dimensions must be positive");
  }
  return dims;
}

std::ifstream open_dataset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open dataset '" + path.string() + "'");
  return in;
}

}  // namespace

void validate_group(const CandidateGroup& g, const DatasetDims& dims) {
  if (g.candidates.size() < 2) {
    throw ValidationError("group '" + g.group_id + "' needs at least two candidates");
  }
  if (g.query.rows() != dims.text_tokens || g.query.cols() != dims.model_dim) {
    throw ValidationError("group '" + g.group_id + "' query is " + g.query.shape_string() + ", expected " +
                          std::to_string(dims.text_tokens) + "x" + std::to_string(dims.model_dim));
  }
  std::set<std::string> ids;
  for (const auto& c : g.candidates) {
    if (!ids.insert(c.id).second) throw ValidationError("group '" + g.group_id + "' repeats candidate id '" + c.id + "'");
    if (c.visual.rows() != dims.visual_tokens || c.visual.cols() != dims.model_dim) {
      throw ValidationError("group '" + g.group_id + "' candidate '" + c.id + "' is " + c.visual.shape_string() +
                            ", expected " + std::to_string(dims.visual_tokens) + "x" + std::to_string(dims.model_dim));
    }
    if ((c.loss && *c.loss < 0.0) || (c.true_loss && *c.true_loss < 0.0)) {
      throw ValidationError("group '" + g.group_id + "' candidate '" + c.id + "' has a negative loss");
    }
  }
  if (g.rank) {
    std::vector<bool> seen(g.size(), false);
    if (g.rank->size() != g.size()) throw ValidationError("group '" + g.group_id + "' rank has the wrong length");
    for (std::size_t r : *g.rank) {
      if (r >= g.size() || seen[r]) throw ValidationError("group '" + g.group_id + "' rank is not a permutation");
      seen[r] = true;
    }
  }
}

void save_dataset(const Dataset& ds, const fs::path& path) {
  const fs::path base = path.parent_path();
  const std::string blob_dir = path.stem().string() + ".blobs";
  fs::create_directories(base.empty() ? fs::path(blob_dir) : base / blob_dir);

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PathError("cannot open '" + path.string() + "' for writing");
  const json manifest = {{"format", kFormat},
                         {"version", kVersion},
                         {"D", ds.dims.model_dim},
                         {"l_v", ds.dims.visual_tokens},
                         {"l_t", ds.dims.text_tokens}};
  out << manifest.dump() << '\n';
  for (std::size_t gi = 0; gi < ds.groups.size(); ++gi) {
    const auto& g = ds.groups[gi];
    validate_group(g, ds.dims);
    const std::string qrel = blob_dir + "/" + blob_name(gi, "query");
    save_avt(base / qrel, g.query);
    json rec;
    rec["group_id"] = g.group_id;
    rec["query"] = qrel;
    json cands = json::array();
    for (std::size_t ci = 0; ci < g.size(); ++ci) {
      const auto& c = g.candidates[ci];
      const std::string crel = blob_dir + "/" + blob_name(gi, "c" + std::to_string(ci));
      save_avt(base / crel, c.visual);
      json cj = {{"id", c.id}, {"blob", crel}};
      if (c.loss) cj["loss"] = *c.loss;
      if (c.true_loss) cj["true_loss"] = *c.true_loss;
      cands.push_back(std::move(cj));
    }
    rec["candidates"] = std::move(cands);
    if (g.rank) rec["rank"] = *g.rank;
    out << rec.dump() << '\n';
  }
  if (!out) throw PathError("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const fs::path& path) {
  std::ifstream in = open_dataset(path);
  Dataset ds;
  ds.dims = parse_manifest(in, path);
  std::string line;
  std::size_t lineno = 1;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string gid;
    CandidateGroup g = parse_record(line, path, lineno, ds.dims, gid);
    if (!ids.insert(g.group_id).second) {
      throw ValidationError(at_line(path, lineno) + "duplicate group id '" + g.group_id + "'");
    }
    ds.groups.push_back(std::move(g));
  }
  return ds;
}

LenientDataset load_dataset_lenient(const fs::path& path) {
  std::ifstream in = open_dataset(path);
  LenientDataset ds;
  ds.dims = parse_manifest(in, path);
  std::string line;
  std::size_t lineno = 1;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string gid;
    DatasetEntry entry;
    try {
      CandidateGroup g = parse_record(line, path, lineno, ds.dims, gid);
      if (!ids.insert(g.group_id).second) {
        throw ValidationError(at_line(path, lineno) + "duplicate group id '" + g.group_id + "'");
      }
      entry.group = std::move(g);
    } catch (const Error& e) {
      entry.error = GroupLoadError{lineno, gid, e.kind(), e.what()};
    }
    ds.entries.push_back(std::move(entry));
  }
  return ds;
}

}  // namespace autov
