#include "softlearn/ensemble.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace softlearn {

namespace {

using nlohmann::json;

constexpr const char* kMagic = "SOFTLEARN-MODEL";
constexpr int kFormatVersion = 1;

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(v >> (8 * b));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw Error(ErrorCode::Parse, "model file truncated");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | bytes[b];
  return v;
}

}  // namespace

void save_model(const SoftLearner& model, std::ostream& out) {
  json header;
  header["format_version"] = kFormatVersion;
  header["task"] = to_string(model.task());
  header["n_classes"] = model.n_classes();
  header["n_features"] = model.n_features();
  header["seed"] = model.seed();
  header["weights"] = vector_json(model.weights());
  header["standardizer"] = {{"mean", vector_json(model.standardizer().mean)},
                            {"scale", vector_json(model.standardizer().scale)}};
  json library = json::array();
  for (const auto& s : model.library().specialists) {
    if (s.is_external()) throw Error(ErrorCode::Config, "cannot save a model with external specialist '" + s.id + "'");
    library.push_back(to_json(s));
  }
  header["library"] = std::move(library);

  out << kMagic << '\n' << header.dump() << '\n';
  for (const auto& s : model.specialists()) {
    const auto blob = json::to_cbor(s.state());
    write_u64(out, blob.size());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
  if (!out) throw Error(ErrorCode::Io, "failed to write model");
}

SoftLearner load_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw Error(ErrorCode::Parse, "not a model file");
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, "model header missing");
  try {
    const json header = json::parse(line);
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::Parse, "unsupported model format version");
    }
    const TaskKind task = task_from_string(header.at("task").get<std::string>());
    const int n_classes = header.at("n_classes").get<int>();
    const Index n_features = header.at("n_features").get<Index>();
    SpecialistLibrary library;
    for (const auto& s : header.at("library")) library.specialists.push_back(config_from_json(s));
    Standardizer standardizer;
    standardizer.mean = vector_from(header.at("standardizer").at("mean"));
    standardizer.scale = vector_from(header.at("standardizer").at("scale"));

    std::vector<TrainedSpecialist> specialists;
    for (const auto& config : library.specialists) {
      const std::uint64_t size = read_u64(in);
      std::vector<std::uint8_t> blob(size);
      if (!in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(size))) {
        throw Error(ErrorCode::Parse, "model file truncated in specialist '" + config.id + "'");
      }
      specialists.push_back(TrainedSpecialist::restore(config, task, n_classes, n_features, json::from_cbor(blob)));
    }
    return SoftLearner::from_parts(std::move(library), task, n_classes, std::move(standardizer),
                                   std::move(specialists), vector_from(header.at("weights")));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model header: ") + e.what());
  }
}

void save_model(const SoftLearner& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  save_model(model, out);
}

SoftLearner load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return load_model(in);
}

}  // namespace softlearn
