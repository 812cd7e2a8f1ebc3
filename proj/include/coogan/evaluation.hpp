#pragma once

#include <string>
#include <vector>

#include "coogan/data.hpp"
#include "coogan/networks.hpp"

namespace coogan {

// Peak signal-to-noise ratio in dB with values mapped to [0,255];
// identical images return +infinity.
double psnr(const ImageTensor& a, const ImageTensor& b);

// Windowed SSIM: 11x11 Gaussian (sigma 1.5), C1=(0.01*255)^2,
// C2=(0.03*255)^2, valid region only, averaged over channels.
double ssim(const ImageTensor& a, const ImageTensor& b);

// Boundary-vs-interior pixel difference statistic: mean |delta| across
// patch-border pixel pairs minus mean |delta| across equally many seeded
// random interior-adjacent pairs. Near zero for untiled images.
double seam_score(const ImageTensor& x, i64 patch_size, std::uint64_t seed = 1234);

struct ClassifierOptions {
    DiscriminatorSpec spec;
    int steps = 400;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 7;
};

// Attribute classifier in the shape of the discriminator's classifying part
// (shared trunk + classification head), trained with plain BCE.
Discriminator train_attr_classifier(const ImageFolderDataset& ds, const ClassifierOptions& opt);

// Sigmoid probabilities for one image (resized to the classifier's input).
std::vector<double> classify(const Discriminator& classifier, const ImageTensor& img);

// Plain label accuracy on dataset rows (fraction of correct flags).
double classifier_accuracy(const Discriminator& classifier, const ImageFolderDataset& ds,
                           const std::vector<size_t>& indices);

struct EditedSample {
    ImageTensor image;       // edited output
    AttributeVector target;  // requested labels
    DiffVector diff;         // which attributes were actually flipped
};

struct AccuracyReport {
    std::vector<double> per_attribute;  // empty slots are NaN-free: attributes never flipped get -1
    double average = 0.0;               // unweighted over attributes that were flipped
};

// Editing accuracy: an edit counts for attribute i only when diff[i] != 0,
// and succeeds when the classifier's flag matches the requested target.
AccuracyReport attr_accuracy(const Discriminator& classifier,
                             const std::vector<EditedSample>& samples);

void write_accuracy_csv(const std::string& path, const std::vector<std::string>& names,
                        const AccuracyReport& report);

}  // namespace coogan
