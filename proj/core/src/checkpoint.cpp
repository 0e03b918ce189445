#include "silrrt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "silrrt/error.hpp"

namespace silrrt {

namespace {

constexpr const char* kMagic = "SILRRT-CHECKPOINT";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

std::size_t element_size(Dtype d) { return d == Dtype::F32 ? 4 : 8; }

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const std::string& Checkpoint::hyperparameter(const std::string& key) const {
  auto it = hyperparameters.find(key);
  if (it == hyperparameters.end()) throw FormatError("checkpoint header lacks hyperparameter '" + key + "'");
  return it->second;
}

int hyperparameter_int(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw FormatError("missing hyperparameter '" + key + "'");
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size()) throw FormatError("hyperparameter '" + key + "' is not an integer");
  return v;
}

double hyperparameter_double(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw FormatError("missing hyperparameter '" + key + "'");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size()) throw FormatError("hyperparameter '" + key + "' is not a number");
  return v;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["format_version"] = ckpt.format_version;
  header["model_kind"] = ckpt.model_kind;
  header["hyperparameters"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : ckpt.hyperparameters) header["hyperparameters"][k] = v;
  header["entries"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& e : ckpt.entries) {
    std::int64_t count = 1;
    for (auto d : e.shape) count *= d;
    if (count != static_cast<std::int64_t>(e.data.size())) {
      throw FormatError("checkpoint entry '" + e.name + "' shape does not match its data");
    }
    const std::uint64_t nbytes = static_cast<std::uint64_t>(count) * element_size(e.dtype);
    header["entries"].push_back({{"name", e.name},
                                 {"shape", e.shape},
                                 {"dtype", e.dtype == Dtype::F32 ? "f32" : "f64"},
                                 {"offset", offset},
                                 {"nbytes", nbytes}});
    offset += nbytes;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << kMagic << ' ' << Checkpoint::kFormatVersion << '\n' << header.dump() << '\n';
  for (const auto& e : ckpt.entries) {
    for (double x : e.data) {
      if (e.dtype == Dtype::F32) {
        write_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
      } else {
        write_le(out, std::bit_cast<std::uint64_t>(x));
      }
    }
  }
  if (!out) throw IoError("failed while writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string magic_line, header_line;
  std::getline(in, magic_line);
  std::getline(in, header_line);
  std::istringstream ml(magic_line);
  std::string magic;
  int version = 0;
  ml >> magic >> version;
  if (magic != kMagic) throw FormatError(path.string() + " is not a checkpoint file");
  if (version != Checkpoint::kFormatVersion) {
    throw FormatError("unsupported checkpoint format version " + std::to_string(version));
  }
  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
    ckpt.format_version = header.at("format_version").get<int>();
    ckpt.model_kind = header.at("model_kind").get<std::string>();
    for (const auto& [k, v] : header.at("hyperparameters").items()) ckpt.hyperparameters[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed checkpoint header: " + std::string(e.what()));
  }
  const std::streampos payload = in.tellg();
  for (const auto& je : header.at("entries")) {
    CheckpointEntry e;
    e.name = je.at("name").get<std::string>();
    e.shape = je.at("shape").get<std::vector<std::int64_t>>();
    const auto dt = je.at("dtype").get<std::string>();
    if (dt != "f32" && dt != "f64") throw FormatError("unknown dtype '" + dt + "'");
    e.dtype = dt == "f32" ? Dtype::F32 : Dtype::F64;
    std::int64_t count = 1;
    for (auto d : e.shape) count *= d;
    in.seekg(payload + static_cast<std::streamoff>(je.at("offset").get<std::uint64_t>()));
    e.data.resize(static_cast<std::size_t>(count));
    for (auto& x : e.data) {
      if (e.dtype == Dtype::F32) {
        x = static_cast<double>(std::bit_cast<float>(read_le<std::uint32_t>(in)));
      } else {
        x = std::bit_cast<double>(read_le<std::uint64_t>(in));
      }
    }
    if (!in) throw FormatError("checkpoint payload truncated at entry '" + e.name + "'");
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

}  // namespace silrrt
