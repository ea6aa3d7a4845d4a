#include "cauge/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cauge/config.hpp"

namespace cauge::train {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'U', 'G', 'E', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
int64_t read_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_string(std::istream& is) {
  const uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u32(os, static_cast<uint32_t>(t.rank()));
  for (int d : t.shape()) write_u32(os, static_cast<uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(double))));
}
Tensor read_tensor(std::istream& is) {
  const uint32_t rank = read_u32(is);
  if (rank > 8) throw IoError("checkpoint: corrupt tensor rank");
  std::vector<int> shape(rank);
  for (auto& d : shape) d = static_cast<int>(read_u32(is));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(double))));
  return t;
}

void write_opt(std::ostream& os, const OptimizerState& st) {
  write_i64(os, st.t);
  write_u32(os, static_cast<uint32_t>(st.slots.size()));
  for (const auto& [name, mv] : st.slots) {
    write_string(os, name);
    write_tensor(os, mv.m);
    write_tensor(os, mv.v);
  }
}
OptimizerState read_opt(std::istream& is) {
  OptimizerState st;
  st.t = read_i64(is);
  const uint32_t n = read_u32(is);
  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = read_string(is);
    AdamTensors mv;
    mv.m = read_tensor(is);
    mv.v = read_tensor(is);
    st.slots.emplace(name, std::move(mv));
  }
  return st;
}

}  // namespace

void save_checkpoint(const CheckpointRecord& rec, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_string(os, rec.config_json);
  write_i64(os, rec.epochs_completed);
  write_i64(os, rec.global_step);
  write_u32(os, static_cast<uint32_t>(rec.params.items.size()));
  for (const auto& p : rec.params.items) {
    write_string(os, p.name);
    write_u32(os, static_cast<uint32_t>(p.owner));
    write_tensor(os, p.value);
  }
  write_opt(os, rec.adam_main);
  write_opt(os, rec.adam_cls);
  if (!os) throw IoError("checkpoint write failed: " + path);
}

CheckpointRecord load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StateError("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw StateError("not a checkpoint file: " + path);
  const uint32_t version = read_u32(is);
  if (version != kVersion)
    throw StateError("checkpoint version mismatch: file has v" + std::to_string(version) +
                     ", tool expects v" + std::to_string(kVersion));
  CheckpointRecord rec;
  rec.config_json = read_string(is);
  rec.epochs_completed = read_i64(is);
  rec.global_step = read_i64(is);
  const uint32_t n = read_u32(is);
  for (uint32_t i = 0; i < n; ++i) {
    nets::Param p;
    p.name = read_string(is);
    p.owner = static_cast<nets::Owner>(read_u32(is));
    p.value = read_tensor(is);
    rec.params.items.push_back(std::move(p));
  }
  rec.adam_main = read_opt(is);
  rec.adam_cls = read_opt(is);
  if (!is) throw IoError("truncated checkpoint: " + path);
  return rec;
}

void apply_params(const CheckpointRecord& rec, nets::Model& model) {
  for (auto& p : model.params().items) {
    const int idx = rec.params.find(p.name);
    if (idx < 0) throw StateError("checkpoint is missing parameter '" + p.name + "'");
    const Tensor& src = rec.params.items[static_cast<size_t>(idx)].value;
    if (src.shape() != p.value.shape())
      throw DimensionError("checkpoint tensor '" + p.name + "' has shape " + src.shape_str() +
                           " but the model expects " + p.value.shape_str());
    p.value = src;
  }
}

nets::Model model_from_checkpoint(const CheckpointRecord& rec) {
  const auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(rec.config_json));
  nets::Model model(cfg.network);
  apply_params(rec, model);
  return model;
}

}  // namespace cauge::train
