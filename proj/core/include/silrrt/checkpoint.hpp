#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace silrrt {

enum class Dtype { F32, F64 };

struct CheckpointEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  Dtype dtype = Dtype::F64;
  std::vector<double> data;  // F32 entries are widened on load and narrowed on save
};

/// On disk: a magic line, one line of JSON header (format_version, model_kind,
/// hyperparameters, entry table with byte offsets), then the little-endian raw
/// payload of every entry in table order.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string model_kind;
  std::map<std::string, std::string> hyperparameters;
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
  const std::string& hyperparameter(const std::string& key) const;
};

/// Typed lookups into a hyperparameter map; a missing or malformed value throws FormatError.
int hyperparameter_int(const std::map<std::string, std::string>& h, const std::string& key);
double hyperparameter_double(const std::map<std::string, std::string>& h, const std::string& key);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace silrrt
