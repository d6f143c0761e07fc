#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "autov/pipeline.hpp"

namespace autov {

struct DatasetDims {
  std::size_t model_dim = 0;
  std::size_t visual_tokens = 0;
  std::size_t text_tokens = 0;

  bool operator==(const DatasetDims&) const = default;
};

struct Dataset {
  DatasetDims dims;
  std::vector<CandidateGroup> groups;
};

// Line-delimited JSON. Line 1 is the manifest
//   {"format":"autov-dataset","version":1,"D":..,"l_v":..,"l_t":..}
// and every following line one group
//   {"group_id":..,"query":<blob>,"candidates":[{"id":..,"blob":..,"loss":..}],"rank":[..]}
// Blob paths are relative to the dataset file. save_dataset writes the blobs
// into a sibling directory named after the file stem.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct GroupLoadError {
  std::size_t line = 0;
  std::string group_id;  // empty when the record could not be parsed that far
  std::string kind;
  std::string message;
};

struct DatasetEntry {
  std::optional<CandidateGroup> group;
  std::optional<GroupLoadError> error;
};

struct LenientDataset {
  DatasetDims dims;
  std::vector<DatasetEntry> entries;  // file order
};

// Like load_dataset, but per-record failures become error entries. Manifest
// failures still throw.
LenientDataset load_dataset_lenient(const std::filesystem::path& path);

// Checks a group against the dataset dims and the group invariants.
void validate_group(const CandidateGroup& g, const DatasetDims& dims);

}  // namespace autov
