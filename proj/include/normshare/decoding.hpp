// Greedy decoding over a frozen model: argmax per step (ties to the lowest
// id), stop at </s> or at the 2*|source|+10 length cap.
#pragma once

#include <string>
#include <vector>

#include "normshare/model.hpp"

namespace normshare {

template <class Real>
std::vector<int> greedy_decode_ids(MultiTaskModel<Real>& model, const std::string& task,
                                   const std::vector<int>& src_ids) {
    Tape<Real> tape(/*recording=*/false);
    auto enc = encode(model, tape, task, src_ids, /*train=*/false);
    DecoderState<Real> state = enc.init;
    const int cap = 2 * static_cast<int>(src_ids.size()) + 10;
    std::vector<int> out;
    int prev = Vocabulary::kBos;
    for (int step = 0; step < cap; ++step) {
        auto att = detail::attend_with_proj(model, tape, task, enc.states, enc.enc_proj, state.h);
        auto dec = decode_step(model, tape, task, prev, state, att.context, /*train=*/false);
        state = dec.state;
        const auto& logits = dec.logits.values();
        int best = 0;
        for (int j = 1; j < static_cast<int>(logits.size()); ++j)
            if (logits[static_cast<size_t>(j)] > logits[static_cast<size_t>(best)]) best = j;
        if (best == Vocabulary::kEos) break;
        out.push_back(best);
        prev = best;
    }
    return out;
}

// Renders decoded ids as a hypothesis string; special symbols are stripped and
// g2p phoneme symbols are joined with spaces.
template <class Real>
std::string greedy_decode(MultiTaskModel<Real>& model, const std::string& task,
                          const std::vector<int>& src_ids, TaskKind render_task = TaskKind::normalization) {
    const auto ids = greedy_decode_ids(model, task, src_ids);
    const char* sep = render_task == TaskKind::g2p ? " " : "";
    std::string out;
    for (int id : ids) {
        if (Vocabulary::is_special(id)) continue;
        if (!out.empty() && *sep) out += sep;
        out += model.tgt_vocab().symbol_of(id);
    }
    return out;
}

}  // namespace normshare
