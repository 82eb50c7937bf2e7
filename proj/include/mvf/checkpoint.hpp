#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mvf/state.hpp"

namespace mvf {

// Checkpoint archive, version "fusor-v1".
// Layout: 10-byte magic "FUSORCKPT\n", little-endian u32 JSON header length,
// JSON header {version, scalar_type, config, tensors:[{name,rows,cols}]},
// then each tensor's raw column-major scalars in header order. Extra tensors
// (e.g. a classifier head) ride along after the fusor parameters.

inline constexpr char kCheckpointMagic[] = "FUSORCKPT\n";
inline constexpr std::size_t kCheckpointMagicLen = 10;

namespace detail {

template <typename Scalar>
const char* scalar_type_name() {
  if constexpr (sizeof(Scalar) == 4) return "f32";
  else return "f64";
}

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline std::uint32_t read_u32_le(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const std::string& path, const FusorState<Scalar>& state,
                     const std::vector<std::pair<std::string, Matrix<Scalar>>>&
                         extra = {}) {
  auto refs = tensor_refs(const_cast<FusorState<Scalar>&>(state));

  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& ref : refs) {
    tensors.push_back({{"name", ref.name},
                       {"rows", ref.tensor->rows()},
                       {"cols", ref.tensor->cols()}});
  }
  for (const auto& [name, tensor] : extra) {
    tensors.push_back(
        {{"name", "extra." + name}, {"rows", tensor.rows()}, {"cols", tensor.cols()}});
  }
  nlohmann::json header = {{"version", "fusor-v1"},
                           {"scalar_type", detail::scalar_type_name<Scalar>()},
                           {"config", state.config},
                           {"tensors", tensors}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, kCheckpointMagicLen);
  detail::write_u32_le(out, static_cast<std::uint32_t>(header_text.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  auto write_tensor = [&out](const Matrix<Scalar>& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(Scalar) * t.size()));
  };
  for (const auto& ref : refs) write_tensor(*ref.tensor);
  for (const auto& [name, tensor] : extra) write_tensor(tensor);
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

template <typename Scalar>
struct Checkpoint {
  FusorState<Scalar> state;
  std::map<std::string, Matrix<Scalar>> extra;
};

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[kCheckpointMagicLen];
  in.read(magic, kCheckpointMagicLen);
  if (!in || std::memcmp(magic, kCheckpointMagic, kCheckpointMagicLen) != 0) {
    throw std::runtime_error("not a fusor checkpoint: " + path);
  }
  const std::uint32_t header_len = detail::read_u32_le(in);
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);

  nlohmann::json header = nlohmann::json::parse(header_text);
  if (header.at("version").get<std::string>() != "fusor-v1") {
    throw std::runtime_error("unsupported checkpoint version");
  }
  if (header.at("scalar_type").get<std::string>() !=
      detail::scalar_type_name<Scalar>()) {
    throw std::runtime_error("checkpoint scalar type mismatch");
  }

  Checkpoint<Scalar> ckpt;
  FusorConfig config = header.at("config").get<FusorConfig>();
  ckpt.state = init_state<Scalar>(config);
  auto refs = tensor_refs(ckpt.state);
  std::map<std::string, Matrix<Scalar>*> by_name;
  for (auto& ref : refs) by_name[ref.name] = ref.tensor;

  std::size_t matched = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    Matrix<Scalar>* target = nullptr;
    if (name.rfind("extra.", 0) == 0) {
      target = &ckpt.extra[name.substr(6)];
      target->resize(rows, cols);
    } else {
      auto it = by_name.find(name);
      if (it == by_name.end()) {
        throw std::runtime_error("unknown tensor in checkpoint: " + name);
      }
      target = it->second;
      if (target->rows() != rows || target->cols() != cols) {
        throw std::runtime_error("tensor shape mismatch in checkpoint: " + name);
      }
      ++matched;
    }
    in.read(reinterpret_cast<char*>(target->data()),
            static_cast<std::streamsize>(sizeof(Scalar) * rows * cols));
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
  }
  if (matched != refs.size()) {
    throw std::runtime_error("checkpoint missing fusor tensors");
  }
  return ckpt;
}

}  // namespace mvf
