#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace hybridaug::testing {

// Published binary confusion matrices and their printed scores (percent),
// one panel per defect category and training-set size. Test split: 800 free
// images plus the category's defect images.

struct Counts {
    std::uint64_t tp, fn, fp, tn;
};

struct Scores {
    double recall, precision, f1;
};

struct Panel {
    std::string_view category;
    int images;
    Counts counts;
    Scores printed;
};

inline constexpr std::array<Panel, 20> kPanels = {{
    {"crack", 2, {9, 11, 16, 784}, {45.00, 36.00, 40.00}},
    {"crack", 5, {12, 8, 11, 785}, {60.00, 52.17, 55.81}},
    {"crack", 10, {17, 3, 7, 793}, {85.00, 70.83, 77.27}},
    {"crack", 15, {19, 1, 6, 794}, {95.00, 76.00, 84.44}},
    {"break", 2, {16, 14, 25, 775}, {53.33, 39.02, 45.07}},
    {"break", 5, {20, 10, 18, 782}, {66.67, 52.63, 58.82}},
    {"break", 10, {23, 7, 11, 789}, {76.67, 67.65, 71.87}},
    {"break", 15, {25, 5, 7, 793}, {83.33, 78.13, 80.65}},
    {"fray", 2, {8, 4, 10, 790}, {66.67, 44.44, 53.33}},
    {"fray", 5, {7, 13, 17, 783}, {82.71, 71.97, 76.98}},
    {"fray", 10, {11, 1, 4, 796}, {91.67, 73.33, 81.48}},
    {"fray", 15, {11, 1, 1, 799}, {91.67, 91.67, 91.69}},
    {"uneven", 2, {12, 18, 19, 769}, {40.00, 38.17, 39.34}},
    {"uneven", 5, {17, 13, 11, 789}, {56.67, 60.71, 58.62}},
    {"uneven", 10, {21, 9, 6, 794}, {70.00, 77.78, 73.69}},
    {"uneven", 15, {23, 7, 2, 798}, {76.67, 92.00, 83.64}},
    {"blowhole", 2, {25, 25, 22, 778}, {50.00, 53.19, 51.55}},
    {"blowhole", 5, {33, 17, 5, 795}, {66.00, 86.84, 75.00}},
    {"blowhole", 10, {40, 10, 3, 797}, {80.00, 93.02, 86.02}},
    {"blowhole", 15, {43, 7, 1, 799}, {86.00, 97.73, 91.49}},
}};

struct MeanRow {
    std::string_view method;
    int images;
    double recall, precision, f1;
};

// Pooled multi-class results: recall and precision over all defects as one class.
inline constexpr std::array<MeanRow, 12> kPooledRows = {{
    {"original", 2, 5.63, 100.00, 10.67},
    {"original", 5, 10.56, 83.33, 18.75},
    {"original", 10, 23.24, 94.29, 37.29},
    {"original", 15, 24.64, 97.22, 39.33},
    {"augmentation", 2, 25.35, 94.74, 40.00},
    {"augmentation", 5, 64.00, 45.96, 53.53},
    {"augmentation", 10, 66.20, 54.65, 59.87},
    {"augmentation", 15, 58.45, 72.17, 64.59},
    {"hybrid", 2, 52.82, 71.43, 60.73},
    {"hybrid", 5, 64.08, 79.13, 70.82},
    {"hybrid", 10, 78.17, 76.03, 77.09},
    {"hybrid", 15, 83.10, 82.52, 82.81},
}};

// Six-class macro results: mean recall (MR) and mean precision (MP).
inline constexpr std::array<MeanRow, 12> kMacroRows = {{
    {"original", 2, 20.83, 30.87, 24.87},
    {"original", 5, 26.39, 30.93, 28.47},
    {"original", 10, 30.56, 47.69, 37.24},
    {"original", 15, 31.44, 81.05, 45.31},
    {"augmentation", 2, 34.22, 81.08, 48.13},
    {"augmentation", 5, 43.94, 65.94, 52.74},
    {"augmentation", 10, 50.81, 59.82, 54.94},
    {"augmentation", 15, 51.82, 62.44, 56.63},
    {"hybrid", 2, 42.36, 70.35, 52.88},
    {"hybrid", 5, 47.83, 71.52, 57.33},
    {"hybrid", 10, 52.26, 75.29, 61.69},
    {"hybrid", 15, 75.03, 62.29, 68.07},
}};

// Test split per category.
inline constexpr std::array<std::pair<std::string_view, int>, 6> kTestSplit = {{
    {"blowhole", 50}, {"fray", 12}, {"uneven", 30}, {"crack", 20}, {"break", 30}, {"free", 800},
}};

}  // namespace hybridaug::testing
