#include "emgnn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "emgnn/error.hpp"

namespace emgnn {

namespace {

constexpr std::array<char, 8> kMagic = {'E', 'M', 'G', 'N', 'N', 'C', 'K', 'P'};

template <class T>
void put_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> bytes;
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream& in, const char* what) {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw DataError(std::string("corrupt checkpoint: truncated while reading ") + what);
    }
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

// JSON has no NaN; undefined metrics are written as null.
nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const GnnConfig& cfg) {
    return {{"arch", to_string(cfg.arch)},
            {"encoder_layers", cfg.encoder_layers},
            {"hidden_dim", cfg.hidden_dim},
            {"meta_layers", cfg.meta_layers},
            {"meta_hidden_dim", cfg.meta_hidden_dim},
            {"head_hidden_dim", cfg.head_hidden_dim},
            {"leaky_slope", cfg.leaky_slope}};
}

GnnConfig gnn_config_from_json(const nlohmann::json& j) {
    GnnConfig cfg;
    try {
        cfg.arch = arch_from_string(j.value("arch", std::string("GCN")));
        cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
        cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
        cfg.meta_layers = j.value("meta_layers", cfg.meta_layers);
        cfg.meta_hidden_dim = j.value("meta_hidden_dim", cfg.meta_hidden_dim);
        cfg.head_hidden_dim = j.value("head_hidden_dim", cfg.head_hidden_dim);
        cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const TrainReport& report) {
    nlohmann::json val = nlohmann::json::array();
    for (double v : report.val_auprc) val.push_back(number_or_null(v));
    return {{"seed", report.seed},
            {"model", to_json(report.model)},
            {"training",
             {{"epochs", report.training.epochs},
              {"lr", report.training.adam.lr},
              {"beta1", report.training.adam.beta1},
              {"beta2", report.training.adam.beta2},
              {"eps", report.training.adam.eps},
              {"positive_weight", report.training.positive_weight}}},
            {"epochs_recorded", report.epoch_loss.size()},
            {"epoch_loss", report.epoch_loss},
            {"val_auprc", val},
            {"best_epoch", report.best_epoch},
            {"best_val_auprc", number_or_null(report.best_val_auprc)},
            {"test_auprc", number_or_null(report.test_auprc)}};
}

nlohmann::json to_json(const SplitSpec& split, const GeneCatalog& catalog) {
    auto names = [&](const std::vector<std::size_t>& ids) {
        nlohmann::json a = nlohmann::json::array();
        for (std::size_t id : ids) a.push_back(catalog.name(id));
        return a;
    };
    return {{"test_layer", split.test_layer},
            {"seed", split.seed},
            {"test", names(split.test_ids)},
            {"train", names(split.train_ids)},
            {"validation", names(split.val_ids)}};
}

void write_checkpoint(std::ostream& out, const ModelParams& params, const GnnConfig& cfg, std::uint64_t seed) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : params.tensors) {
        tensors.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
    }
    const std::size_t input_dim = params.tensors.empty() ? 0 : params.tensors.front().value.rows();
    const nlohmann::json header = {{"format_version", kCheckpointVersion},
                                   {"seed", seed},
                                   {"input_dim", input_dim},
                                   {"config", to_json(cfg)},
                                   {"tensors", tensors}};
    const std::string text = header.dump();
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : params.tensors) {
        for (double v : t.value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw DataError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size())) throw DataError("corrupt checkpoint: truncated magic");
    if (magic != kMagic) throw DataError("corrupt checkpoint: bad magic bytes");
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version) + " (supported versions: " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = get_le<std::uint64_t>(in, "header length");
    if (header_len > (1u << 26)) throw DataError("corrupt checkpoint: implausible header length");
    std::string text(header_len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
        throw DataError("corrupt checkpoint: truncated header");
    }
    Checkpoint ck;
    try {
        const auto header = nlohmann::json::parse(text);
        ck.seed = header.at("seed").get<std::uint64_t>();
        ck.input_dim = header.at("input_dim").get<std::size_t>();
        ck.config = gnn_config_from_json(header.at("config"));
        const auto expected = param_shapes(ck.config, ck.input_dim);
        const auto& tensors = header.at("tensors");
        if (tensors.size() != expected.size()) throw DataError("corrupt checkpoint: tensor count does not match config");
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const auto name = tensors[i].at("name").get<std::string>();
            const auto rows = tensors[i].at("rows").get<std::size_t>();
            const auto cols = tensors[i].at("cols").get<std::size_t>();
            if (name != expected[i].name || rows != expected[i].rows || cols != expected[i].cols) {
                throw DataError("corrupt checkpoint: tensor '" + name + "' does not match the declared config");
            }
            Tensor t(rows, cols);
            for (double& v : t.values()) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "tensor data"));
            ck.params.tensors.push_back({name, std::move(t)});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt checkpoint: invalid header: ") + e.what());
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("corrupt checkpoint: trailing bytes");
    return ck;
}

void save_checkpoint(const ModelParams& params, const GnnConfig& cfg, std::uint64_t seed,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    write_checkpoint(out, params, cfg, seed);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace emgnn
