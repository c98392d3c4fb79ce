// The six-component attentional encoder-decoder (S, E, A, T, D, P) with a
// parameter registry that realizes any hard-sharing configuration across tasks.
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "normshare/adam.hpp"
#include "normshare/common.hpp"
#include "normshare/dataset.hpp"
#include "normshare/rng.hpp"
#include "normshare/sharing.hpp"
#include "normshare/tape.hpp"
#include "normshare/vocab.hpp"

namespace normshare {

struct HyperParams {
    int embed_dim = 60;
    int hidden_dim = 300;
    double dropout = 0.2;
    int batch_size_main = 30;
    int aux_tokens_per_batch = 10;

    void validate() const {
        if (embed_dim <= 0 || hidden_dim <= 0 || batch_size_main <= 0 || aux_tokens_per_batch <= 0)
            throw ParameterError("hyperparameters must be positive");
        if (dropout < 0.0 || dropout >= 1.0)
            throw ParameterError(cat("dropout must be in [0,1), got ", dropout));
        if (hidden_dim % 2 != 0)
            throw ParameterError(cat("hidden_dim must be even (bidirectional halves), got ", hidden_dim));
    }
};

template <class Real>
struct Component {
    char letter = '?';
    std::string owner;  // "shared" or a task id
    std::vector<std::pair<std::string, std::shared_ptr<Tensor<Real>>>> params;

    Tensor<Real>& get(const std::string& name) {
        for (auto& [n, t] : params)
            if (n == name) return *t;
        throw ContractError(cat("component ", std::string(1, letter), "/", owner, " has no parameter '", name, "'"));
    }
    const Tensor<Real>& get(const std::string& name) const {
        return const_cast<Component*>(this)->get(name);
    }
};

template <class Real>
class MultiTaskModel {
public:
    MultiTaskModel(SharingConfig config, std::vector<std::string> tasks, Vocabulary src_vocab,
                   Vocabulary tgt_vocab, HyperParams hp, uint64_t seed)
        : config_(config),
          tasks_(std::move(tasks)),
          src_vocab_(std::move(src_vocab)),
          tgt_vocab_(std::move(tgt_vocab)),
          hp_(hp) {
        if (tasks_.empty()) throw ContractError("build_model: need at least one task");
        if (src_vocab_.size() <= 4 || tgt_vocab_.size() <= 4)
            throw ContractError("build_model: empty vocabulary");
        hp_.validate();
        Pcg32 rng(seed);
        for (const char* l = SharingConfig::kLetters; *l; ++l) {
            std::vector<std::string> owners =
                config_.shares(*l) ? std::vector<std::string>{"shared"} : tasks_;
            for (const auto& owner : owners) registry_[*l][owner] = make_component(*l, owner, rng);
        }
    }

    const SharingConfig& config() const { return config_; }
    const std::vector<std::string>& tasks() const { return tasks_; }
    const Vocabulary& src_vocab() const { return src_vocab_; }
    const Vocabulary& tgt_vocab() const { return tgt_vocab_; }
    const HyperParams& hp() const { return hp_; }

    Component<Real>& component(char letter, const std::string& task) {
        const std::string owner = config_.shares(letter) ? std::string("shared") : task;
        auto lit = registry_.find(letter);
        if (lit == registry_.end()) throw ContractError(cat("unknown component letter '", std::string(1, letter), "'"));
        auto oit = lit->second.find(owner);
        if (oit == lit->second.end())
            throw ContractError(cat("no component ", std::string(1, letter), " for task '", task, "'"));
        return *oit->second;
    }

    // Every parameter tensor exactly once, in a fixed deterministic order.
    std::vector<Tensor<Real>*> all_params() {
        std::vector<Tensor<Real>*> out;
        for_each_component([&](Component<Real>& c) {
            for (auto& [name, t] : c.params) out.push_back(t.get());
        });
        return out;
    }

    template <class Fn>
    void for_each_component(Fn&& fn) {
        for (const char* l = SharingConfig::kLetters; *l; ++l) {
            auto& owners = registry_[*l];
            if (config_.shares(*l)) {
                fn(*owners.at("shared"));
            } else {
                for (const auto& task : tasks_) fn(*owners.at(task));
            }
        }
    }

    // letter -> (instance count, scalars per instance)
    std::map<char, std::pair<long, long>> count_parameters() {
        std::map<char, std::pair<long, long>> out;
        for (const char* l = SharingConfig::kLetters; *l; ++l) {
            const long instances = config_.shares(*l) ? 1 : static_cast<long>(tasks_.size());
            long scalars = 0;
            auto& first = config_.shares(*l) ? registry_[*l].at("shared") : registry_[*l].at(tasks_.front());
            for (auto& [name, t] : first->params) scalars += static_cast<long>(t->numel());
            out[*l] = {instances, scalars};
        }
        return out;
    }

    long total_parameters() {
        long total = 0;
        for (auto& [letter, pair] : count_parameters()) total += pair.first * pair.second;
        return total;
    }

    // Deep copy / restore of all parameter values (best-epoch checkpointing).
    std::vector<std::vector<Real>> snapshot_values() {
        std::vector<std::vector<Real>> out;
        for (Tensor<Real>* t : all_params()) out.push_back(t->values);
        return out;
    }
    void restore_values(const std::vector<std::vector<Real>>& snap) {
        auto params = all_params();
        if (snap.size() != params.size()) throw ContractError("restore_values: parameter count mismatch");
        for (size_t i = 0; i < params.size(); ++i) params[i]->values = snap[i];
    }

private:
    std::shared_ptr<Component<Real>> make_component(char letter, const std::string& owner, Pcg32& rng) {
        const int e = hp_.embed_dim;
        const int h = hp_.hidden_dim;
        const int h2 = h / 2;
        const int vs = src_vocab_.size();
        const int vt = tgt_vocab_.size();
        auto comp = std::make_shared<Component<Real>>();
        comp->letter = letter;
        comp->owner = owner;
        auto weight = [&](const std::string& name, std::vector<int> shape) {
            auto t = std::make_shared<Tensor<Real>>(std::move(shape), true);
            t->fill_uniform(rng, -0.1, 0.1);
            comp->params.emplace_back(name, std::move(t));
        };
        auto bias = [&](const std::string& name, int width, bool lstm_forget = false) {
            auto t = std::make_shared<Tensor<Real>>(std::vector<int>{1, width}, true);
            if (lstm_forget) {
                const int hidden = width / 4;
                for (int j = hidden; j < 2 * hidden; ++j) t->values[static_cast<size_t>(j)] = Real(1);
            }
            comp->params.emplace_back(name, std::move(t));
        };
        switch (letter) {
            case 'S':
                weight("table", {vs, e});
                break;
            case 'E':
                weight("fwd_w", {e + h2, 4 * h2});
                bias("fwd_b", 4 * h2, true);
                weight("bwd_w", {e + h2, 4 * h2});
                bias("bwd_b", 4 * h2, true);
                weight("init_w", {h2, h});
                bias("init_b", h);
                break;
            case 'A':
                weight("enc_w", {h, h});
                weight("dec_w", {h, h});
                weight("v", {h, 1});
                break;
            case 'T':
                weight("table", {vt, e});
                break;
            case 'D':
                weight("w", {e + h + h, 4 * h});
                bias("b", 4 * h, true);
                break;
            case 'P':
                weight("out_w", {h, vt});
                bias("out_b", vt);
                break;
            default:
                throw ContractError(cat("unknown component letter '", std::string(1, letter), "'"));
        }
        return comp;
    }

    SharingConfig config_;
    std::vector<std::string> tasks_;
    Vocabulary src_vocab_;
    Vocabulary tgt_vocab_;
    HyperParams hp_;
    std::map<char, std::map<std::string, std::shared_ptr<Component<Real>>>> registry_;
};

template <class Real>
MultiTaskModel<Real> build_model(SharingConfig config, std::vector<std::string> tasks, Vocabulary src_vocab,
                                 Vocabulary tgt_vocab, HyperParams hp, uint64_t seed) {
    return MultiTaskModel<Real>(config, std::move(tasks), std::move(src_vocab), std::move(tgt_vocab), hp, seed);
}

// ---- forward passes ----

template <class Real>
struct DecoderState {
    Var<Real> h;
    Var<Real> c;
};

template <class Real>
struct EncodeOut {
    Var<Real> states;    // (len, hidden)
    Var<Real> enc_proj;  // (len, hidden): W_enc · h_j, reused across decode steps
    DecoderState<Real> init;
};

template <class Real>
struct AttendOut {
    Var<Real> context;  // (1, hidden)
    Var<Real> weights;  // (1, len)
};

namespace detail {

template <class Real>
std::pair<Var<Real>, Var<Real>> lstm_step(Tape<Real>& tape, Var<Real> x, Var<Real> h_prev, Var<Real> c_prev,
                                          Tensor<Real>& w, Tensor<Real>& b, int hidden) {
    auto gates = add_row(matmul(concat_cols<Real>({x, h_prev}), tape.leaf(w)), tape.leaf(b));
    auto i = sigmoid(slice_cols(gates, 0, hidden));
    auto f = sigmoid(slice_cols(gates, hidden, 2 * hidden));
    auto g = normshare::tanh(slice_cols(gates, 2 * hidden, 3 * hidden));
    auto o = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
    auto c = add(mul(f, c_prev), mul(i, g));
    auto h = mul(o, normshare::tanh(c));
    return {h, c};
}

}  // namespace detail

// Bidirectional encoder: one state per input position, each the concatenation
// of the forward and backward half-states. Also derives the decoder start
// state from the final backward state through a learned projection.
template <class Real>
EncodeOut<Real> encode(MultiTaskModel<Real>& model, Tape<Real>& tape, const std::string& task,
                       const std::vector<int>& src_ids, bool train = false, Pcg32* rng = nullptr) {
    if (src_ids.empty()) throw ContractError("encode: empty source sequence");
    const int h = model.hp().hidden_dim;
    const int h2 = h / 2;
    const int len = static_cast<int>(src_ids.size());
    const double p = model.hp().dropout;

    auto& s_comp = model.component('S', task);
    auto& e_comp = model.component('E', task);

    Var<Real> embedded = embedding_lookup(tape.leaf(s_comp.get("table")), src_ids);
    if (train && rng) embedded = dropout(embedded, p, *rng, true);

    auto zeros = [&](int width) { return tape.constant({1, width}, std::vector<Real>(static_cast<size_t>(width), Real(0))); };

    std::vector<Var<Real>> fwd(static_cast<size_t>(len), Var<Real>{});
    {
        Var<Real> hh = zeros(h2), cc = zeros(h2);
        for (int t = 0; t < len; ++t) {
            auto x = slice_rows(embedded, t, t + 1);
            std::tie(hh, cc) = detail::lstm_step(tape, x, hh, cc, e_comp.get("fwd_w"), e_comp.get("fwd_b"), h2);
            fwd[static_cast<size_t>(t)] = hh;
        }
    }
    std::vector<Var<Real>> bwd(static_cast<size_t>(len), Var<Real>{});
    {
        Var<Real> hh = zeros(h2), cc = zeros(h2);
        for (int t = len - 1; t >= 0; --t) {
            auto x = slice_rows(embedded, t, t + 1);
            std::tie(hh, cc) = detail::lstm_step(tape, x, hh, cc, e_comp.get("bwd_w"), e_comp.get("bwd_b"), h2);
            bwd[static_cast<size_t>(t)] = hh;
        }
    }

    std::vector<Var<Real>> rows;
    rows.reserve(static_cast<size_t>(len));
    for (int t = 0; t < len; ++t)
        rows.push_back(concat_cols<Real>({fwd[static_cast<size_t>(t)], bwd[static_cast<size_t>(t)]}));
    Var<Real> states = len == 1 ? rows[0] : concat_rows(rows);
    if (train && rng) states = dropout(states, p, *rng, true);

    EncodeOut<Real> out;
    out.states = states;
    auto& a_comp = model.component('A', task);
    out.enc_proj = matmul(states, tape.leaf(a_comp.get("enc_w")));
    out.init.h = normshare::tanh(
        add_row(matmul(bwd[0], tape.leaf(e_comp.get("init_w"))), tape.leaf(e_comp.get("init_b"))));
    out.init.c = zeros(h);
    return out;
}

namespace detail {

template <class Real>
AttendOut<Real> attend_with_proj(MultiTaskModel<Real>& model, Tape<Real>& tape, const std::string& task,
                                 Var<Real> states, Var<Real> enc_proj, Var<Real> decoder_h) {
    auto& a_comp = model.component('A', task);
    auto dec_proj = matmul(decoder_h, tape.leaf(a_comp.get("dec_w")));
    auto scores = matmul(normshare::tanh(add_row(enc_proj, dec_proj)), tape.leaf(a_comp.get("v")));
    auto weights = softmax(reshape(scores, {1, states.rows()}));
    AttendOut<Real> out;
    out.weights = weights;
    out.context = matmul(weights, states);
    return out;
}

}  // namespace detail

// MLP attention: weights = softmax_j( v' tanh(W_enc h_j + W_dec s) ),
// context = sum_j weights_j h_j.
template <class Real>
AttendOut<Real> attend(MultiTaskModel<Real>& model, Tape<Real>& tape, const std::string& task, Var<Real> states,
                       Var<Real> decoder_h) {
    if (states.rows() < 1) throw ContractError("attend: empty state sequence");
    auto& a_comp = model.component('A', task);
    auto enc_proj = matmul(states, tape.leaf(a_comp.get("enc_w")));
    return detail::attend_with_proj(model, tape, task, states, enc_proj, decoder_h);
}

template <class Real>
struct DecodeStepOut {
    Var<Real> logits;  // (1, V_tgt)
    DecoderState<Real> state;
};

// One decoder step: consume concat(embed(prev), context), emit logits.
template <class Real>
DecodeStepOut<Real> decode_step(MultiTaskModel<Real>& model, Tape<Real>& tape, const std::string& task,
                                int prev_char_id, DecoderState<Real> state, Var<Real> context,
                                bool train = false, Pcg32* rng = nullptr) {
    auto& t_comp = model.component('T', task);
    auto& d_comp = model.component('D', task);
    auto& p_comp = model.component('P', task);
    const double p = model.hp().dropout;

    Var<Real> emb = embedding_lookup(tape.leaf(t_comp.get("table")), std::vector<int>{prev_char_id});
    if (train && rng) emb = dropout(emb, p, *rng, true);
    auto x = concat_cols<Real>({emb, context});
    auto [h, c] = detail::lstm_step(tape, x, state.h, state.c, d_comp.get("w"), d_comp.get("b"),
                                    model.hp().hidden_dim);
    Var<Real> out = h;
    if (train && rng) out = dropout(out, p, *rng, true);
    DecodeStepOut<Real> step;
    step.logits = add_row(matmul(out, tape.leaf(p_comp.get("out_w"))), tape.leaf(p_comp.get("out_b")));
    step.state = {h, c};
    return step;
}

template <class Real>
struct BatchLoss {
    Var<Real> loss;       // mean per-character cross entropy
    size_t char_count = 0;
};

// Teacher-forced sequence cross entropy, mean over all target characters in
// the batch (end-of-sequence symbol included).
template <class Real>
BatchLoss<Real> forward_loss(MultiTaskModel<Real>& model, Tape<Real>& tape, const std::string& task,
                             const std::vector<EncodedPair>& batch, bool train, Pcg32* rng = nullptr) {
    if (batch.empty()) throw ContractError("forward_loss: empty batch");
    std::vector<Var<Real>> logit_rows;
    std::vector<int> targets;
    for (const auto& pair : batch) {
        auto enc = encode(model, tape, task, pair.src, train, rng);
        DecoderState<Real> state = enc.init;
        std::vector<int> step_targets = pair.tgt;
        step_targets.push_back(Vocabulary::kEos);
        int prev = Vocabulary::kBos;
        for (int t = 0; t < static_cast<int>(step_targets.size()); ++t) {
            auto att = detail::attend_with_proj(model, tape, task, enc.states, enc.enc_proj, state.h);
            auto step = decode_step(model, tape, task, prev, state, att.context, train, rng);
            state = step.state;
            logit_rows.push_back(step.logits);
            targets.push_back(step_targets[static_cast<size_t>(t)]);
            prev = step_targets[static_cast<size_t>(t)];  // teacher forcing
        }
    }
    BatchLoss<Real> out;
    out.loss = cross_entropy_loss(logit_rows.size() == 1 ? logit_rows[0] : concat_rows(logit_rows), targets);
    out.char_count = targets.size();
    return out;
}

// ---- checkpoint io ----

namespace detail {

inline void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
inline uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
inline std::string read_str(std::istream& is) {
    const uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

constexpr char kCheckpointMagic[9] = "NSHCKPT1";

}  // namespace detail

template <class Real>
void save_checkpoint(MultiTaskModel<Real>& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(cat("cannot write checkpoint: ", path));
    os.write(detail::kCheckpointMagic, 8);
    detail::write_u32(os, static_cast<uint32_t>(sizeof(Real)));
    const auto& hp = model.hp();
    detail::write_u32(os, static_cast<uint32_t>(hp.embed_dim));
    detail::write_u32(os, static_cast<uint32_t>(hp.hidden_dim));
    detail::write_f64(os, hp.dropout);
    detail::write_u32(os, static_cast<uint32_t>(hp.batch_size_main));
    detail::write_u32(os, static_cast<uint32_t>(hp.aux_tokens_per_batch));
    detail::write_str(os, model.config().str());
    detail::write_u32(os, static_cast<uint32_t>(model.tasks().size()));
    for (const auto& t : model.tasks()) detail::write_str(os, t);
    detail::write_u32(os, static_cast<uint32_t>(model.src_vocab().symbols().size()));
    for (const auto& s : model.src_vocab().symbols()) detail::write_str(os, s);
    detail::write_u32(os, static_cast<uint32_t>(model.tgt_vocab().symbols().size()));
    for (const auto& s : model.tgt_vocab().symbols()) detail::write_str(os, s);

    uint64_t tensor_count = 0;
    model.for_each_component([&](Component<Real>& c) { tensor_count += c.params.size(); });
    detail::write_u64(os, tensor_count);
    model.for_each_component([&](Component<Real>& c) {
        for (auto& [name, t] : c.params) {
            detail::write_str(os, cat(std::string(1, c.letter), "/", c.owner, "/", name));
            detail::write_u32(os, static_cast<uint32_t>(t->shape.size()));
            for (int d : t->shape) detail::write_u32(os, static_cast<uint32_t>(d));
            os.write(reinterpret_cast<const char*>(t->values.data()),
                     static_cast<std::streamsize>(t->values.size() * sizeof(Real)));
        }
    });
    if (!os) throw Error(cat("failed writing checkpoint: ", path));
}

template <class Real>
MultiTaskModel<Real> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(cat("cannot open checkpoint: ", path));
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(detail::kCheckpointMagic, 8))
        throw ParseError(cat("not a checkpoint file: ", path));
    const uint32_t real_size = detail::read_u32(is);
    if (real_size != sizeof(Real))
        throw ParseError(cat(path, ": checkpoint precision is f", real_size * 8, ", expected f", sizeof(Real) * 8));
    HyperParams hp;
    hp.embed_dim = static_cast<int>(detail::read_u32(is));
    hp.hidden_dim = static_cast<int>(detail::read_u32(is));
    hp.dropout = detail::read_f64(is);
    hp.batch_size_main = static_cast<int>(detail::read_u32(is));
    hp.aux_tokens_per_batch = static_cast<int>(detail::read_u32(is));
    const SharingConfig config = SharingConfig::parse(detail::read_str(is));
    std::vector<std::string> tasks(detail::read_u32(is));
    for (auto& t : tasks) t = detail::read_str(is);
    std::vector<std::string> src_syms(detail::read_u32(is));
    for (auto& s : src_syms) s = detail::read_str(is);
    std::vector<std::string> tgt_syms(detail::read_u32(is));
    for (auto& s : tgt_syms) s = detail::read_str(is);

    MultiTaskModel<Real> model(config, tasks, Vocabulary::from_symbols(src_syms),
                               Vocabulary::from_symbols(tgt_syms), hp, /*seed=*/0);

    std::map<std::string, Tensor<Real>*> by_name;
    model.for_each_component([&](Component<Real>& c) {
        for (auto& [name, t] : c.params)
            by_name[cat(std::string(1, c.letter), "/", c.owner, "/", name)] = t.get();
    });
    const uint64_t tensor_count = detail::read_u64(is);
    if (tensor_count != by_name.size())
        throw ParseError(cat(path, ": tensor count mismatch (", tensor_count, " vs ", by_name.size(), ")"));
    for (uint64_t i = 0; i < tensor_count; ++i) {
        const std::string name = detail::read_str(is);
        auto it = by_name.find(name);
        if (it == by_name.end()) throw ParseError(cat(path, ": unknown tensor '", name, "'"));
        Tensor<Real>* t = it->second;
        std::vector<int> shape(detail::read_u32(is));
        for (auto& d : shape) d = static_cast<int>(detail::read_u32(is));
        if (shape != t->shape)
            throw ParseError(cat(path, ": tensor '", name, "' shape mismatch ", shape_str(shape), " vs ",
                                 shape_str(t->shape)));
        is.read(reinterpret_cast<char*>(t->values.data()),
                static_cast<std::streamsize>(t->values.size() * sizeof(Real)));
    }
    if (!is) throw ParseError(cat(path, ": truncated checkpoint"));
    return model;
}

}  // namespace normshare
