#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "coogan/networks.hpp"
#include "coogan/npy.hpp"

namespace coogan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json spec_to_json(const GeneratorSpec& s) {
    return json{{"n_layers", s.n_layers},
                {"base_channels", s.base_channels},
                {"input_channels", s.input_channels},
                {"skip_mode", to_string(s.skip_mode)},
                {"skip_count", s.skip_count},
                {"n_attributes", s.n_attributes}};
}

GeneratorSpec generator_spec_from_json(const json& j) {
    GeneratorSpec s;
    s.n_layers = j.at("n_layers").get<int>();
    s.base_channels = j.at("base_channels").get<int>();
    s.input_channels = j.at("input_channels").get<int>();
    s.skip_mode = skip_mode_from_string(j.at("skip_mode").get<std::string>());
    s.skip_count = j.at("skip_count").get<int>();
    s.n_attributes = j.at("n_attributes").get<int>();
    return s;
}

json spec_to_json(const DiscriminatorSpec& s) {
    return json{{"n_layers", s.n_layers},
                {"base_channels", s.base_channels},
                {"n_attributes", s.n_attributes},
                {"input_size", s.input_size}};
}

DiscriminatorSpec discriminator_spec_from_json(const json& j) {
    DiscriminatorSpec s;
    s.n_layers = j.at("n_layers").get<int>();
    s.base_channels = j.at("base_channels").get<int>();
    s.n_attributes = j.at("n_attributes").get<int>();
    s.input_size = j.at("input_size").get<int>();
    return s;
}

void write_manifest(const std::string& dir, const std::string& kind, const json& spec,
                    const nn::ParamMap& pm) {
    json params = json::array();
    for (const auto& kv : pm.items())
        params.push_back(json{{"name", kv.first}, {"shape", kv.second.shape()}});
    json manifest{{"format", "coogan-checkpoint-v1"},
                  {"kind", kind},
                  {"spec", spec},
                  {"params", params}};
    std::ofstream f(dir + "/manifest.json");
    if (!f) throw data_error("checkpoint: cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

json read_manifest(const std::string& dir) {
    std::ifstream f(dir + "/manifest.json");
    if (!f) throw data_error("checkpoint: no manifest.json in " + dir);
    json j;
    f >> j;
    if (j.value("format", "") != "coogan-checkpoint-v1")
        throw data_error("checkpoint: unrecognized format in " + dir);
    return j;
}

void save_params(const std::string& dir, const nn::ParamMap& pm) {
    for (const auto& kv : pm.items()) npy::save(dir + "/" + kv.first + ".npy", kv.second.value());
}

void load_params(const std::string& dir, nn::ParamMap& pm, const json& manifest) {
    const auto& listed = manifest.at("params");
    if (listed.size() != pm.items().size())
        throw data_error("checkpoint: parameter count mismatch in " + dir);
    for (auto& kv : pm.items()) {
        Tensor t = npy::load(dir + "/" + kv.first + ".npy");
        if (t.shape() != kv.second.shape())
            throw data_error("checkpoint: shape mismatch for parameter " + kv.first);
        std::copy(t.data(), t.data() + t.numel(), kv.second.value().data());
    }
}

}  // namespace

void save_generator(const Generator& g, const std::string& dir) {
    fs::create_directories(dir);
    write_manifest(dir, "generator", spec_to_json(g.spec()), g.params());
    save_params(dir, g.params());
}

Generator load_generator(const std::string& dir) {
    json m = read_manifest(dir);
    if (m.at("kind") != "generator") throw data_error("checkpoint: not a generator: " + dir);
    Generator g = Generator::build(generator_spec_from_json(m.at("spec")), 0);
    load_params(dir, g.params(), m);
    return g;
}

void save_discriminator(const Discriminator& d, const std::string& dir) {
    fs::create_directories(dir);
    write_manifest(dir, "discriminator", spec_to_json(d.spec()), d.params());
    save_params(dir, d.params());
}

Discriminator load_discriminator(const std::string& dir) {
    json m = read_manifest(dir);
    if (m.at("kind") != "discriminator")
        throw data_error("checkpoint: not a discriminator: " + dir);
    Discriminator d = Discriminator::build(discriminator_spec_from_json(m.at("spec")), 0);
    load_params(dir, d.params(), m);
    return d;
}

std::string checkpoint_kind(const std::string& dir) {
    return read_manifest(dir).at("kind").get<std::string>();
}

}  // namespace coogan
