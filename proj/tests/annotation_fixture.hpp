#pragma once

#include "cqasim/annotation.hpp"
#include "support.hpp"

#include <random>

namespace testing {

/// Two systems over one context: item 0 identical, item 1 one-sided
/// CannotFind, items 2 and 3 fully judgeable.
inline std::pair<cqasim::Dataset, cqasim::Dataset> paired_datasets(std::size_t n_conversations = 1)
{
    using namespace cqasim;
    Dataset a{"quac", {}}, b{"simulated", {}};
    for (std::size_t k = 0; k < n_conversations; ++k) {
        const auto ctx = context("conv" + std::to_string(k),
                                 "Alpha beta gamma. Delta epsilon zeta. Eta theta iota. Kappa lambda mu.");
        Conversation ca, cb;
        ca.context = cb.context = ctx;
        const std::vector<std::pair<Answer, Answer>> answers{
            {found(ctx, "Alpha beta gamma."), found(ctx, "Alpha beta gamma.")},
            {cannot_find(), found(ctx, "Delta epsilon zeta.")},
            {found(ctx, "Eta theta"), found(ctx, "Eta theta iota.")},
            {found(ctx, "Kappa lambda mu."), found(ctx, "Delta epsilon")},
        };
        for (std::size_t i = 0; i < answers.size(); ++i) {
            Turn t;
            t.index = i;
            t.id = ctx.id + "_q#" + std::to_string(i);
            t.question = "Question " + std::to_string(i) + "?";
            t.answer = answers[i].first;
            ca.turns.push_back(t);
            t.answer = answers[i].second;
            cb.turns.push_back(t);
        }
        a.conversations.push_back(ca);
        b.conversations.push_back(cb);
    }
    return {a, b};
}

inline cqasim::annotation::Quiz eight_question_quiz()
{
    cqasim::annotation::Quiz q;
    const char* key[] = {"A", "B", "Both", "Neither", "A", "B", "A", "Neither"};
    for (int i = 0; i < 8; ++i)
        q.questions.push_back({"q" + std::to_string(i), "Question", {"A", "B", "Both", "Neither"}, key[i]});
    return q;
}

} // namespace testing
