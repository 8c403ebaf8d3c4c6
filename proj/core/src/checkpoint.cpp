#include "llvd/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "llvd/config_file.hpp"
#include "llvd/data.hpp"

namespace llvd {

namespace {

void write_u16le(std::ostream& out, uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32le(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint16_t read_u16le(std::istream& in, const std::string& path) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) throw IoError(path + ": truncated");
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError(path + ": truncated");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void check_magic(std::istream& in, const char* magic, const std::string& path,
                 const char* what) {
  char buf[4];
  if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
    throw IoError(path + ": not a " + what + " file");
  }
  const int version = in.get();
  if (version != 1) throw IoError(path + ": unsupported version " + std::to_string(version));
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write("LLVC", 4);
  out.put(1);

  const std::string cfg_text = model_config_to_kv(model.config()).to_text();
  write_u32le(out, static_cast<uint32_t>(cfg_text.size()));
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));

  const auto& params = model.params();
  write_u32le(out, static_cast<uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    write_u16le(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, tensor);
  }
  if (!out) throw IoError(path + ": write failed");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  check_magic(in, "LLVC", path, "checkpoint");

  const uint32_t cfg_len = read_u32le(in, path);
  std::string cfg_text(cfg_len, '\0');
  if (!in.read(cfg_text.data(), cfg_len)) throw IoError(path + ": truncated config");
  Model model(model_config_from(KeyValues::parse(cfg_text)));

  const uint32_t count = read_u32le(in, path);
  if (count != model.params().size()) {
    throw IoError(path + ": has " + std::to_string(count) + " parameters, architecture needs " +
                  std::to_string(model.params().size()));
  }
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = read_u16le(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw IoError(path + ": truncated parameter name");
    Tensor stored = read_tensor(in, path + " [" + name + "]");
    Tensor& dst = model.param(name);  // throws for names the architecture lacks
    if (stored.dims != dst.dims) {
      throw IoError(path + ": parameter '" + name + "' is " + shape_str(stored.dims) +
                    ", architecture needs " + shape_str(dst.dims));
    }
    dst = std::move(stored);
  }
  return model;
}

void save_recurrent_state(const std::string& path, const RecurrentState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write("LLVS", 4);
  out.put(1);
  write_u32le(out, static_cast<uint32_t>(state.layers.size()));
  for (const auto& layer : state.layers) {
    if (layer.h.empty() || layer.c.empty()) {
      throw ValueError("save_recurrent_state: uninitialized layer state");
    }
    write_tensor(out, layer.h);
    write_tensor(out, layer.c);
  }
  if (!out) throw IoError(path + ": write failed");
}

RecurrentState load_recurrent_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  check_magic(in, "LLVS", path, "recurrent state");
  const uint32_t layers = read_u32le(in, path);
  RecurrentState state;
  state.layers.resize(layers);
  for (uint32_t i = 0; i < layers; ++i) {
    state.layers[i].h = read_tensor(in, path + " [layer " + std::to_string(i) + " h]");
    state.layers[i].c = read_tensor(in, path + " [layer " + std::to_string(i) + " c]");
    if (state.layers[i].h.dims != state.layers[i].c.dims) {
      throw IoError(path + ": layer " + std::to_string(i) + " hidden/cell shapes differ");
    }
  }
  return state;
}

}  // namespace llvd
