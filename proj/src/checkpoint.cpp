#include "grouplift/checkpoint.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "grouplift/errors.hpp"

namespace grouplift {

namespace {

constexpr const char* kMagic = "grouplift-ckpt v1";

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_network(std::ostream& out, const std::string& tag,
                   const DenseNetwork& net) {
    out << tag << " layers " << net.layers.size() << " input_dim "
        << net.input_dim << '\n';
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        out << "layer " << l << ' ' << layer.out_dim() << ' ' << layer.in_dim()
            << ' '
            << (layer.activation == Activation::ReLU ? "relu" : "identity")
            << ' ' << (layer.frozen ? 1 : 0) << '\n';
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            out << 'W';
            for (std::size_t c = 0; c < layer.in_dim(); ++c) {
                if (!std::isfinite(layer.weights(r, c))) {
                    throw numeric_error("refusing to save non-finite weights");
                }
                out << ' ' << fmt17(layer.weights(r, c));
            }
            out << '\n';
        }
        out << 'b';
        for (double v : layer.bias) {
            if (!std::isfinite(v)) {
                throw numeric_error("refusing to save non-finite bias");
            }
            out << ' ' << fmt17(v);
        }
        out << '\n';
    }
}

struct Reader {
    std::ifstream in;
    std::string path;
    std::size_t lineno = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw parse_error(path + ":" + std::to_string(lineno) + ": " + msg);
    }

    std::string next_line() {
        std::string line;
        if (!std::getline(in, line)) fail("unexpected end of file");
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }
};

double parse_double(Reader& r, const std::string& tok) {
    // strtod instead of stod: subnormal values underflow-round with ERANGE
    // set, which is fine; only overflow and trailing junk are errors.
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || end != tok.c_str() + tok.size() ||
        (errno == ERANGE && std::fabs(v) == HUGE_VAL)) {
        r.fail("bad number '" + tok + "'");
    }
    if (!std::isfinite(v)) r.fail("non-finite number '" + tok + "'");
    return v;
}

std::uint64_t parse_u64(Reader& r, const std::string& tok, int base = 10) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(tok, &used, base);
        if (used != tok.size()) r.fail("bad integer '" + tok + "'");
        return v;
    } catch (const std::exception&) {
        r.fail("bad integer '" + tok + "'");
    }
}

// Expects "key value" and returns the value token.
std::string expect_kv(Reader& r, const std::string& key) {
    std::istringstream ss(r.next_line());
    std::string k, v, extra;
    if (!(ss >> k >> v) || k != key || (ss >> extra)) {
        r.fail("expected '" + key + " <value>'");
    }
    return v;
}

DenseNetwork read_network(Reader& r, const std::string& tag) {
    std::istringstream ss(r.next_line());
    std::string got_tag, kw1, kw2;
    std::size_t layer_count = 0, input_dim = 0;
    if (!(ss >> got_tag >> kw1 >> layer_count >> kw2 >> input_dim) ||
        got_tag != tag || kw1 != "layers" || kw2 != "input_dim") {
        r.fail("expected '" + tag + " layers <n> input_dim <d>'");
    }
    DenseNetwork net;
    net.input_dim = input_dim;
    for (std::size_t l = 0; l < layer_count; ++l) {
        std::istringstream hs(r.next_line());
        std::string kw, act;
        std::size_t idx = 0, out = 0, in = 0;
        int frozen = 0;
        if (!(hs >> kw >> idx >> out >> in >> act >> frozen) || kw != "layer" ||
            idx != l) {
            r.fail("expected 'layer " + std::to_string(l) + " ...'");
        }
        DenseLayer layer;
        if (act == "relu") {
            layer.activation = Activation::ReLU;
        } else if (act == "identity") {
            layer.activation = Activation::Identity;
        } else {
            r.fail("unknown activation '" + act + "'");
        }
        if (frozen != 0 && frozen != 1) r.fail("frozen flag must be 0 or 1");
        layer.frozen = frozen == 1;
        layer.weights = Matrix(out, in);
        for (std::size_t row = 0; row < out; ++row) {
            std::istringstream ws(r.next_line());
            std::string lead;
            if (!(ws >> lead) || lead != "W") r.fail("expected weight row");
            std::string tok;
            for (std::size_t c = 0; c < in; ++c) {
                if (!(ws >> tok)) r.fail("weight row too short");
                layer.weights(row, c) = parse_double(r, tok);
            }
            if (ws >> tok) r.fail("weight row too long");
        }
        std::istringstream bs(r.next_line());
        std::string lead, tok;
        if (!(bs >> lead) || lead != "b") r.fail("expected bias row");
        layer.bias.resize(out);
        for (std::size_t c = 0; c < out; ++c) {
            if (!(bs >> tok)) r.fail("bias row too short");
            layer.bias[c] = parse_double(r, tok);
        }
        if (bs >> tok) r.fail("bias row too long");
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    validate(ckpt.model);
    std::ostringstream out;
    out << kMagic << '\n';
    out << "seed " << ckpt.seed << '\n';
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(ckpt.config_hash));
    out << "config_hash " << hash << '\n';
    out << "attributes " << ckpt.model.attribute_count() << '\n';
    for (std::size_t i = 0; i < ckpt.model.attribute_count(); ++i) {
        out << "attribute " << i << ' ' << ckpt.model.attribute_names[i]
            << '\n';
    }
    for (std::size_t i = 0; i < ckpt.model.attribute_count(); ++i) {
        out << "loss_weight " << i << ' ' << fmt17(ckpt.model.loss_weights[i])
            << '\n';
    }
    write_network(out, "trunk", ckpt.model.trunk);
    for (std::size_t i = 0; i < ckpt.model.heads.size(); ++i) {
        write_network(out, "head", ckpt.model.heads[i].net);
    }
    out << "end\n";

    std::ofstream file(path, std::ios::binary);
    if (!file) throw data_error("cannot write checkpoint '" + path + "'");
    file << out.str();
    if (!file) throw data_error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    r.in.open(path, std::ios::binary);
    if (!r.in) throw data_error("cannot open checkpoint '" + path + "'");

    if (r.next_line() != kMagic) {
        r.fail("not a recognised checkpoint (bad magic line)");
    }
    Checkpoint ckpt;
    ckpt.seed = parse_u64(r, expect_kv(r, "seed"));
    ckpt.config_hash = parse_u64(r, expect_kv(r, "config_hash"), 16);
    const std::size_t attrs =
        static_cast<std::size_t>(parse_u64(r, expect_kv(r, "attributes")));
    if (attrs == 0) r.fail("checkpoint has no attributes");

    ckpt.model.attribute_names.resize(attrs);
    for (std::size_t i = 0; i < attrs; ++i) {
        std::istringstream ss(r.next_line());
        std::string kw;
        std::size_t idx = 0;
        if (!(ss >> kw >> idx) || kw != "attribute" || idx != i) {
            r.fail("expected 'attribute " + std::to_string(i) + " <name>'");
        }
        std::string name;
        std::getline(ss, name);
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.front()))) {
            name.erase(name.begin());
        }
        if (name.empty()) r.fail("empty attribute name");
        ckpt.model.attribute_names[i] = name;
    }
    ckpt.model.loss_weights.resize(attrs);
    for (std::size_t i = 0; i < attrs; ++i) {
        std::istringstream ss(r.next_line());
        std::string kw, tok;
        std::size_t idx = 0;
        if (!(ss >> kw >> idx >> tok) || kw != "loss_weight" || idx != i) {
            r.fail("expected 'loss_weight " + std::to_string(i) + " <value>'");
        }
        ckpt.model.loss_weights[i] = parse_double(r, tok);
    }
    ckpt.model.trunk = read_network(r, "trunk");
    for (std::size_t i = 0; i < attrs; ++i) {
        AttributeHead head;
        head.net = read_network(r, "head");
        ckpt.model.heads.push_back(std::move(head));
    }
    if (r.next_line() != "end") r.fail("expected 'end'");

    try {
        validate(ckpt.model);
    } catch (const error& e) {
        throw parse_error(path + ": inconsistent checkpoint: " + e.what());
    }
    return ckpt;
}

}  // namespace grouplift
