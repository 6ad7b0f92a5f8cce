#include "psychkit/proficiency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psychkit/error.hpp"

namespace psychkit::proficiency {
namespace {

constexpr const char* kModule = "proficiency";

long band_of(double theta, double origin) {
    return static_cast<long>(std::floor((theta - origin) / kLevelWidth));
}

}  // namespace

double adjusted_difficulty(double a, double b, double target_p) {
    if (!(a > 0.0)) throw Error(kModule, "discrimination must be positive");
    if (!(target_p > 0.0 && target_p < 1.0)) throw Error(kModule, "target probability must be in (0, 1)");
    return b + std::log(target_p / (1.0 - target_p)) / a;
}

int ProficiencyProfile::level_of(double theta) const {
    for (const auto& level : levels)
        if (level.contains(theta)) return level.index;
    throw Error(kModule, "no level contains theta");
}

ProficiencyProfile build_profile(const irt::IrtModel& model,
                                 const std::map<std::string, Vector>& abilities,
                                 const ProfileOptions& options) {
    if (model.kind != irt::ModelKind::two_pl)
        throw Error(kModule, "proficiency levels need a 2PL model");
    const Index k = model.n_items();
    if (k == 0) throw Error(kModule, "model has no items");

    ProficiencyProfile profile;
    profile.origin = options.origin;
    profile.min_items = options.min_items;
    profile.target_p = options.target_p;
    profile.items = model.items;
    std::map<long, Index> band_counts;
    for (Index j = 0; j < k; ++j) {
        const double t = adjusted_difficulty(model.a(j), model.b(j), options.target_p);
        profile.adjusted.push_back(t);
        ++band_counts[band_of(t, options.origin)];
    }

    std::vector<long> dense;
    for (const auto& [band, count] : band_counts)
        if (count >= options.min_items) dense.push_back(band);
    const long first = dense.empty() ? band_counts.begin()->first : dense.front();
    const long last = dense.empty() ? band_counts.rbegin()->first : dense.back();

    auto edge = [&](long band) { return options.origin + kLevelWidth * static_cast<double>(band); };
    Level bottom;
    bottom.upper = edge(first);
    profile.levels.push_back(bottom);
    for (long band = first; band <= last; ++band) {
        Level level;
        level.lower = edge(band);
        level.upper = edge(band + 1);
        profile.levels.push_back(level);
    }
    Level top;
    top.lower = edge(last + 1);
    profile.levels.push_back(top);
    for (std::size_t i = 0; i < profile.levels.size(); ++i) profile.levels[i].index = static_cast<int>(i);

    std::vector<Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index x, Index y) { return profile.adjusted[x] < profile.adjusted[y]; });
    for (const Index j : order) {
        const int lvl = profile.level_of(profile.adjusted[j]);
        profile.levels[lvl].items.push_back(model.items[j]);
        profile.item_assignment[model.items[j]] = lvl;
    }

    for (auto& level : profile.levels) {
        if (level.items.empty()) {
            level.sparse = true;
            continue;
        }
        std::map<long, Index> counts;
        for (const auto& item : level.items) {
            const auto j = std::find(model.items.begin(), model.items.end(), item) - model.items.begin();
            ++counts[band_of(profile.adjusted[j], options.origin)];
        }
        Index densest = 0;
        for (const auto& [band, c] : counts) densest = std::max(densest, c);
        level.sparse = densest < options.min_items;

        // Open levels use the band adjacent to their finite bound.
        const double lo = level.lower ? *level.lower : *level.upper - kLevelWidth;
        const double hi = level.upper ? *level.upper : *level.lower + kLevelWidth;
        const double mid = 0.5 * (lo + hi);
        Index best = -1;
        double best_dist = 0.0;
        for (Index j = 0; j < k; ++j) {
            if (profile.item_assignment[model.items[j]] != level.index) continue;
            const double d = std::abs(profile.adjusted[j] - mid);
            if (best < 0 || d < best_dist - 1e-12) {  // near-ties keep the lower index
                best = j;
                best_dist = d;
            }
        }
        level.anchor = model.items[best];
    }

    for (const auto& [group, theta] : abilities) {
        if (theta.size() == 0) throw Error(kModule, "group " + group + " has no students");
        std::vector<double> pct(profile.levels.size(), 0.0);
        for (Index i = 0; i < theta.size(); ++i) pct[profile.level_of(theta(i))] += 1.0;
        for (auto& p : pct) p *= 100.0 / static_cast<double>(theta.size());
        profile.student_distribution[group] = pct;
        profile.group_sizes[group] = theta.size();
    }
    return profile;
}

std::vector<LevelSemantics> verify_level_semantics(const ProficiencyProfile& profile,
                                                   const irt::IrtModel& model) {
    std::vector<LevelSemantics> out;
    for (const auto& level : profile.levels) {
        LevelSemantics s;
        s.index = level.index;
        if (level.items.empty()) {
            s.note = "empty level";
            out.push_back(s);
            continue;
        }
        auto mean_p = [&](double theta) {
            double total = 0.0;
            for (const auto& item : level.items) {
                const auto j = std::find(model.items.begin(), model.items.end(), item) - model.items.begin();
                if (j == static_cast<long>(model.items.size()))
                    throw Error(kModule, "item " + item + " missing from model");
                total += irt::response_probability(theta, model.a(j), model.b(j));
            }
            return total / static_cast<double>(level.items.size());
        };
        if (level.lower) {
            s.p_lower = mean_p(*level.lower);
            s.lower_deviation = *s.p_lower - kLowerTargetP;
        }
        if (level.upper) {
            s.p_upper = mean_p(*level.upper);
            s.upper_deviation = *s.p_upper - kUpperTargetP;
        }
        if (!level.lower) s.note = "open below";
        if (!level.upper) s.note = "open above";
        if (level.sparse) s.note += std::string(s.note.empty() ? "" : "; ") + "sparse";
        out.push_back(s);
    }
    return out;
}

}  // namespace psychkit::proficiency
