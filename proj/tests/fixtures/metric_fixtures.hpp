#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

// Hand-worked metric cases. Binary cases list (TP, FN, TN, FP) with class 1
// positive; multi-class cases give the confusion matrix row = truth.
struct ClassificationFixture {
    std::string name;
    std::vector<std::vector<unsigned>> matrix;
    std::optional<int> positive;
    double accuracy, precision, recall, f1;
    std::vector<std::string> flags;
};

struct RegressionFixture {
    std::string name;
    std::vector<double> truth, predicted;
    double mae, mse, rmse;
};

inline std::vector<std::vector<unsigned>> binary(unsigned tp, unsigned fn, unsigned tn, unsigned fp) {
    return {{tn, fp}, {fn, tp}};
}

inline const std::vector<ClassificationFixture>& classification_fixtures() {
    static const std::vector<ClassificationFixture> f = {
        {"93/7/96/4", binary(93, 7, 96, 4), 1, 189.0 / 200, 93.0 / 97, 93.0 / 100, 186.0 / 197, {}},
        {"perfect binary", binary(10, 0, 10, 0), 1, 1, 1, 1, 1, {}},
        {"never predicts positive", binary(0, 5, 5, 0), 1, 0.5, 0, 0, 0, {"precision[class=1]", "f1[class=1]"}},
        {"no positives present", binary(0, 0, 8, 2), 1, 0.8, 0, 0, 0, {"recall[class=1]", "f1[class=1]"}},
        {"coin flip", binary(1, 1, 1, 1), 1, 0.5, 0.5, 0.5, 0.5, {}},
        {"no true negatives", binary(3, 1, 0, 2), 1, 3.0 / 6, 3.0 / 5, 3.0 / 4, 6.0 / 9, {}},
        {"50/25/20/5", binary(50, 25, 20, 5), 1, 70.0 / 100, 50.0 / 55, 50.0 / 75, 100.0 / 130, {}},
        {"precise but partial", binary(7, 3, 0, 0), 1, 0.7, 1, 0.7, 14.0 / 17, {}},
        {"negative class as positive", binary(93, 7, 96, 4), 0, 189.0 / 200, 96.0 / 103, 96.0 / 100, 192.0 / 203, {}},
        {"macro identity", {{5, 0, 0}, {0, 5, 0}, {0, 0, 5}}, std::nullopt, 1, 1, 1, 1, {}},
        {"macro cyclic errors", {{2, 1, 0}, {0, 3, 1}, {1, 0, 2}}, std::nullopt, 0.7, 25.0 / 36, 25.0 / 36, 25.0 / 36, {}},
        {"macro class never predicted",
         {{4, 0, 0}, {4, 0, 0}, {0, 0, 2}},
         std::nullopt,
         0.6,
         0.5,
         2.0 / 3,
         5.0 / 9,
         {"precision[class=1]", "f1[class=1]"}},
        {"macro class never true",
         {{1, 2, 3}, {0, 0, 0}, {0, 0, 4}},
         std::nullopt,
         0.5,
         11.0 / 21,
         7.0 / 18,
         26.0 / 77,
         {"recall[class=1]", "f1[class=1]"}},
    };
    return f;
}

inline const std::vector<RegressionFixture>& regression_fixtures() {
    static const std::vector<RegressionFixture> f = {
        {"two points", {0, 0}, {3, 4}, 3.5, 12.5, std::sqrt(12.5)},
        {"exact", {1, 2, 3}, {1, 2, 3}, 0, 0, 0},
        {"single", {1}, {-1}, 2, 4, 2},
        {"alternating unit", {0, 0, 0, 0}, {1, -1, 1, -1}, 1, 1, 1},
        {"mixed", {2.5, 0, 2, 8}, {3, -0.5, 2, 7}, 0.5, 0.375, std::sqrt(0.375)},
        {"integers", {10, 20, 30}, {12, 18, 33}, 7.0 / 3, 17.0 / 3, std::sqrt(17.0 / 3)},
        {"decimals", {0.1, 0.2}, {0.3, 0.1}, 0.15, 0.025, std::sqrt(0.025)},
    };
    return f;
}
