#include "upliftlab/model_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace upliftlab {
namespace {

using nlohmann::json;

json vec_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vec_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), Eigen::Index(values.size()));
}

json split_to_json(const SplitVector& s) {
  return json{{"pos", vec_to_json(s.pos)}, {"neg", vec_to_json(s.neg)}};
}

SplitVector split_from_json(const json& j) {
  SplitVector s;
  s.pos = vec_from_json(j.at("pos"));
  s.neg = vec_from_json(j.at("neg"));
  if (s.pos.size() != s.neg.size()) throw std::runtime_error("model: split halves differ in length");
  if (!s.nonnegative()) throw std::runtime_error("model: negative split component");
  return s;
}

}  // namespace

std::string model_to_json(const TwinParams& params) {
  params.validate();
  json doc;
  doc["format"] = "upliftlab-twin";
  doc["version"] = kModelFormatVersion;
  doc["arch"] = params.arch == Arch::kInteraction ? "interaction" : "hidden";
  doc["p"] = params.p;
  doc["hidden"] = params.widths();
  doc["intercept"] = params.intercept;
  doc["output"] = split_to_json(params.output);
  doc["layers"] = json::array();
  for (const auto& layer : params.layers) {
    doc["layers"].push_back({{"inputs", layer.inputs},
                             {"units", layer.units},
                             {"weights", split_to_json(layer.weights)},
                             {"bias", vec_to_json(layer.bias)},
                             {"scale", split_to_json(layer.scale)}});
  }
  return doc.dump(1);
}

TwinParams model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "upliftlab-twin") throw std::runtime_error("model: unknown format tag");
    if (doc.at("version") != kModelFormatVersion) {
      throw std::runtime_error("model: unsupported version " + doc.at("version").dump());
    }
    TwinParams params;
    const auto arch = doc.at("arch").get<std::string>();
    if (arch == "interaction") {
      params.arch = Arch::kInteraction;
    } else if (arch == "hidden") {
      params.arch = Arch::kHidden;
    } else {
      throw std::runtime_error("model: unknown arch '" + arch + "'");
    }
    params.p = doc.at("p").get<std::size_t>();
    params.intercept = doc.at("intercept").get<double>();
    params.output = split_from_json(doc.at("output"));
    for (const auto& jl : doc.at("layers")) {
      HiddenLayer layer;
      layer.inputs = jl.at("inputs").get<std::size_t>();
      layer.units = jl.at("units").get<std::size_t>();
      layer.weights = split_from_json(jl.at("weights"));
      layer.bias = vec_from_json(jl.at("bias"));
      layer.scale = split_from_json(jl.at("scale"));
      params.layers.push_back(std::move(layer));
    }
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model: malformed document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  }
}

void save_model(const TwinParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << model_to_json(params) << '\n';
}

TwinParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace upliftlab
