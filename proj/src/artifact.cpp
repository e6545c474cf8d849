#include "omahgnn/artifact.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "omahgnn/error.hpp"

namespace omahgnn {

using nlohmann::json;

namespace {

namespace bai = boost::archive::iterators;
using Base64Encoder = bai::base64_from_binary<bai::transform_width<std::string::const_iterator, 6, 8>>;
using Base64Decoder = bai::transform_width<bai::binary_from_base64<std::string::const_iterator>, 8, 6>;

[[noreturn]] void malformed(const std::string& what) {
  throw DataError(DataErrorCode::kMalformed, "run artifact: " + what);
}

json tensor_json(const std::string& name, const Tensor& t) {
  return {{"name", name}, {"shape", {t.rows(), t.cols()}}, {"data", encode_doubles(t.values())}};
}

// Reads the next named tensor from a list, checking name order.
Tensor take_tensor(const json& list, std::size_t& next, const std::string& name) {
  if (!list.is_array() || next >= list.size()) malformed("missing tensor " + name);
  const json& t = list[next++];
  if (t.value("name", std::string()) != name) malformed("expected tensor " + name);
  const auto shape = t.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) malformed(name + " shape");
  auto data = decode_doubles(t.at("data").get<std::string>());
  if (data.size() != shape[0] * shape[1]) malformed(name + " payload length");
  return Tensor(shape[0], shape[1], std::move(data));
}

json state_checkpoints(const TrainState& s) {
  json hgnn = json::array();
  for (std::size_t t = 0; t < s.hgnn.layers.size(); ++t) {
    hgnn.push_back(tensor_json("layer" + std::to_string(t) + ".weight", s.hgnn.layers[t].weight));
    hgnn.push_back(tensor_json("layer" + std::to_string(t) + ".attention", s.hgnn.layers[t].attention));
  }
  json mwn = json::array();
  mwn.push_back(tensor_json("shared.weight", s.mwn.shared_weight));
  mwn.push_back(tensor_json("shared.bias", s.mwn.shared_bias));
  for (std::size_t k = 0; k < s.mwn.heads.size(); ++k) {
    mwn.push_back(tensor_json("head" + std::to_string(k) + ".weight", s.mwn.heads[k].weight));
    mwn.push_back(tensor_json("head" + std::to_string(k) + ".bias", s.mwn.heads[k].bias));
  }
  return {{"hgnn", {{"leaky_slope", s.hgnn.leaky_slope}, {"layers", s.hgnn.layers.size()}, {"tensors", hgnn}}},
          {"mwn",
           {{"output_mode", to_string(s.mwn.mode)},
            {"log1p_inputs", s.mwn.log1p_inputs},
            {"heads", s.mwn.heads.size()},
            {"tensors", mwn}}}};
}

json history_json(const std::vector<StepRecord>& history) {
  json rows = json::array();
  for (const auto& r : history) {
    json alpha = json::array();
    for (const auto& a : r.mean_alpha) alpha.push_back(a ? json(*a) : json(nullptr));
    rows.push_back({{"step", r.step},
                    {"lr_external", r.lr_external},
                    {"lr_internal", r.lr_internal},
                    {"train_loss", r.train_loss},
                    {"meta_loss", r.meta_loss},
                    {"mean_alpha", alpha},
                    {"external_grad_norm", r.external_grad_norm},
                    {"meta_grad_norm", r.meta_grad_norm},
                    {"internal_grad_norm", r.internal_grad_norm}});
  }
  return rows;
}

}  // namespace

std::string encode_doubles(std::span<const double> values) {
  std::string bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  std::string out(Base64Encoder(bytes.cbegin()), Base64Encoder(bytes.cend()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<double> decode_doubles(const std::string& text) {
  if (text.size() % 4 != 0) malformed("base64 length");
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
  std::string body = text.substr(0, text.size() - pad);
  body.append(pad, 'A');
  std::string bytes;
  try {
    bytes.assign(Base64Decoder(body.cbegin()), Base64Decoder(body.cend()));
  } catch (const std::exception&) {
    malformed("invalid base64 payload");
  }
  bytes.resize(bytes.size() - pad);
  if (bytes.size() % 8 != 0) malformed("payload is not a whole number of doubles");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

json to_json(const RunArtifact& a) {
  const TrainState& s = a.state;
  json level_alpha = s.level_alpha;
  return {{"format", "omahgnn-run"},
          {"version", 1},
          {"config", a.config},
          {"dataset",
           {{"name", a.dataset.name},
            {"num_nodes", a.dataset.num_nodes},
            {"feature_dim", a.dataset.feature_dim},
            {"num_classes", a.dataset.num_classes}}},
          {"partition",
           {{"centroids", s.partition.centroids},
            {"k", s.partition.k},
            {"requested_k", s.partition.requested_k},
            {"iterations", s.partition.iterations},
            {"sse_history", s.partition.sse_history},
            {"train_ids", s.train_ids},
            {"train_tasks", s.train_tasks}}},
          {"meta_ids", s.meta_ids},
          {"history", history_json(s.history)},
          {"checkpoints", state_checkpoints(s)},
          {"metrics",
           {{"steps", s.step},
            {"test_accuracy", {{"ss", a.accuracy.ss}, {"fs", a.accuracy.fs}, {"blend", a.accuracy.blend}}},
            {"level_alpha", level_alpha},
            {"mean_alpha", s.mean_alpha}}}};
}

RunArtifact artifact_from_json(const json& j) {
  RunArtifact a;
  try {
    if (j.at("format").get<std::string>() != "omahgnn-run") malformed("unknown format");
    if (j.at("version").get<int>() != 1) malformed("unsupported version");
    a.config = j.at("config");
    const json& d = j.at("dataset");
    a.dataset = {d.at("name").get<std::string>(), d.at("num_nodes").get<std::size_t>(),
                 d.at("feature_dim").get<std::size_t>(), d.at("num_classes").get<std::size_t>()};

    TrainState& s = a.state;
    const json& p = j.at("partition");
    s.partition.centroids = p.at("centroids").get<std::vector<double>>();
    s.partition.k = p.at("k").get<std::size_t>();
    s.partition.requested_k = p.at("requested_k").get<std::size_t>();
    s.partition.iterations = p.at("iterations").get<std::size_t>();
    s.partition.sse_history = p.at("sse_history").get<std::vector<double>>();
    s.train_ids = p.at("train_ids").get<std::vector<NodeId>>();
    s.train_tasks = p.at("train_tasks").get<std::vector<std::size_t>>();
    s.partition.labels = s.train_tasks;
    s.meta_ids = j.at("meta_ids").get<std::vector<NodeId>>();

    for (const json& r : j.at("history")) {
      StepRecord rec;
      rec.step = r.at("step").get<std::size_t>();
      rec.lr_external = r.at("lr_external").get<double>();
      rec.lr_internal = r.at("lr_internal").get<double>();
      rec.train_loss = r.at("train_loss").get<double>();
      rec.meta_loss = r.at("meta_loss").get<double>();
      for (const json& x : r.at("mean_alpha")) {
        rec.mean_alpha.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
      }
      rec.external_grad_norm = r.at("external_grad_norm").get<double>();
      rec.meta_grad_norm = r.at("meta_grad_norm").get<double>();
      rec.internal_grad_norm = r.at("internal_grad_norm").get<double>();
      s.history.push_back(std::move(rec));
    }

    const json& ck = j.at("checkpoints");
    const json& h = ck.at("hgnn");
    s.hgnn.leaky_slope = h.at("leaky_slope").get<double>();
    std::size_t next = 0;
    const std::size_t layers = h.at("layers").get<std::size_t>();
    for (std::size_t t = 0; t < layers; ++t) {
      LayerParams l;
      l.weight = take_tensor(h.at("tensors"), next, "layer" + std::to_string(t) + ".weight");
      l.attention = take_tensor(h.at("tensors"), next, "layer" + std::to_string(t) + ".attention");
      s.hgnn.layers.push_back(std::move(l));
    }
    if (layers == 0) malformed("no HGNN layers");
    const json& m = ck.at("mwn");
    const std::string mode = m.at("output_mode").get<std::string>();
    if (mode == to_string(MwnOutputMode::kComplementary)) {
      s.mwn.mode = MwnOutputMode::kComplementary;
    } else if (mode == to_string(MwnOutputMode::kIndependent)) {
      s.mwn.mode = MwnOutputMode::kIndependent;
    } else {
      malformed("unknown MWN output mode " + mode);
    }
    s.mwn.log1p_inputs = m.at("log1p_inputs").get<bool>();
    next = 0;
    s.mwn.shared_weight = take_tensor(m.at("tensors"), next, "shared.weight");
    s.mwn.shared_bias = take_tensor(m.at("tensors"), next, "shared.bias");
    const std::size_t heads = m.at("heads").get<std::size_t>();
    for (std::size_t k = 0; k < heads; ++k) {
      MwnHead head;
      head.weight = take_tensor(m.at("tensors"), next, "head" + std::to_string(k) + ".weight");
      head.bias = take_tensor(m.at("tensors"), next, "head" + std::to_string(k) + ".bias");
      s.mwn.heads.push_back(std::move(head));
    }

    const json& mt = j.at("metrics");
    s.step = mt.at("steps").get<std::size_t>();
    const json& acc = mt.at("test_accuracy");
    a.accuracy = {acc.at("ss").get<double>(), acc.at("fs").get<double>(), acc.at("blend").get<double>()};
    s.level_alpha = mt.at("level_alpha").get<std::vector<double>>();
    s.mean_alpha = mt.at("mean_alpha").get<double>();
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  if (a.state.history.size() != a.state.step) malformed("history length differs from step count");
  return a;
}

void save_run_artifact(const RunArtifact& artifact, const std::filesystem::path& file) {
  const std::string text = to_json(artifact).dump(1) + "\n";
  if (file.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) throw DataError(DataErrorCode::kUnwritable, file.string());
}

RunArtifact load_run_artifact(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError(DataErrorCode::kMissingFile, file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  return artifact_from_json(j);
}

}  // namespace omahgnn
