#include <algorithm>
#include <cmath>
#include <numeric>

#include "dkg/error.hpp"
#include "dkg/eval.hpp"

namespace dkg {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) fail(Errc::Validation, "scores and labels differ in length");
    for (double s : scores) {
        if (!std::isfinite(s)) fail(Errc::Validation, "scores must be finite");
    }
    for (int y : labels) {
        if (y != 0 && y != 1) fail(Errc::Validation, "labels must be 0 or 1");
    }
}

// Indices ordered by descending score; equal scores keep input order.
std::vector<std::size_t> rank_descending(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

} // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const auto n_neg = static_cast<double>(labels.size()) - n_pos;
    if (n_pos == 0 || n_neg == 0) fail(Errc::Validation, "undefined metric: AUROC needs both classes");

    // Mann-Whitney U with mid-ranks for ties (ascending ranks, 1-based).
    auto idx = rank_descending(scores);
    std::reverse(idx.begin(), idx.end());
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[idx[k]] == 1) rank_sum += mid;
        }
        i = j + 1;
    }
    const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    return u / (n_pos * n_neg);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const auto n_pos = std::count(labels.begin(), labels.end(), 1);
    if (n_pos == 0) fail(Errc::Validation, "undefined metric: AUPRC needs a positive");

    const auto idx = rank_descending(scores);
    double sum = 0.0;
    std::size_t tp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        std::size_t group_pos = 0;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
            group_pos += static_cast<std::size_t>(labels[idx[j]]);
            ++j;
        }
        tp += group_pos;
        const double precision = static_cast<double>(tp) / static_cast<double>(j);
        sum += static_cast<double>(group_pos) * precision;
        i = j;
    }
    return sum / static_cast<double>(n_pos);
}

} // namespace dkg
