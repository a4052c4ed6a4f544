#include "acs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "acs/errors.hpp"
#include "acs/rng.hpp"

namespace acs {

namespace {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open file: " + path);
    }
    in.seekg(0, std::ios::end);
    const auto len = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<unsigned char> bytes(len);
    if (len > 0) {
        in.read(reinterpret_cast<char*>(bytes.data()),
                static_cast<std::streamsize>(len));
    }
    if (!in) {
        throw InputError("read failed: " + path);
    }
    return bytes;
}

std::uint32_t read_be_u32(const std::vector<unsigned char>& b, std::size_t off,
                          const std::string& path) {
    if (off + 4 > b.size()) {
        throw FormatError(path + ": truncated at byte offset " +
                          std::to_string(off));
    }
    return (static_cast<std::uint32_t>(b[off]) << 24) |
           (static_cast<std::uint32_t>(b[off + 1]) << 16) |
           (static_cast<std::uint32_t>(b[off + 2]) << 8) |
           static_cast<std::uint32_t>(b[off + 3]);
}

template <class T>
void write_pod(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
void read_pod(std::ifstream& in, T& value, const std::string& path) {
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) {
        throw FormatError(path + ": truncated at byte offset " +
                          std::to_string(static_cast<long long>(in.tellg())));
    }
}

Sample make_sample(std::size_t id, std::vector<double> features, int label,
                   int num_classes) {
    Sample s;
    s.id = id;
    s.features = std::move(features);
    s.label = label;
    s.label_one_hot = one_hot(static_cast<std::size_t>(num_classes),
                              static_cast<std::size_t>(label));
    return s;
}

} // namespace

Tensor2 Dataset::gather_features(const std::vector<std::size_t>& ids) const {
    Tensor2 x(ids.size(), feature_dim());
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const std::size_t id = ids[r];
        if (id >= samples.size()) {
            throw InputError("gather_features: unknown sample id " +
                             std::to_string(id));
        }
        const auto& f = samples[id].features;
        std::copy(f.begin(), f.end(), x.row(r));
    }
    return x;
}

Tensor2 Dataset::gather_labels(const std::vector<std::size_t>& ids) const {
    Tensor2 y(ids.size(), static_cast<std::size_t>(num_classes));
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const std::size_t id = ids[r];
        if (id >= samples.size()) {
            throw InputError("gather_labels: unknown sample id " +
                             std::to_string(id));
        }
        y.at(r, static_cast<std::size_t>(samples[id].label)) = 1.0;
    }
    return y;
}

std::vector<std::size_t> Dataset::all_ids() const {
    std::vector<std::size_t> ids(samples.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
}

void Dataset::validate() const {
    if (num_classes < 1) {
        throw InputError("dataset: num_classes must be positive");
    }
    const std::size_t d = feature_dim();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.id != i) {
            throw InputError("dataset: non-contiguous id " + std::to_string(s.id) +
                             " at index " + std::to_string(i));
        }
        if (s.features.size() != d) {
            throw DimensionError("dataset: ragged feature width at sample " +
                                 std::to_string(i));
        }
        if (s.label < 0 || s.label >= num_classes) {
            throw InputError("dataset: label " + std::to_string(s.label) +
                             " out of range at sample " + std::to_string(i));
        }
    }
    for (std::size_t id : noisy_ids) {
        if (id >= samples.size()) {
            throw InputError("dataset: noisy id " + std::to_string(id) +
                             " out of range");
        }
    }
}

Dataset make_synthetic(const SyntheticSpec& spec) {
    if (spec.classes < 1 || spec.dims < 1 || spec.per_class < 1) {
        throw ConfigError("synthetic spec: classes, dims and per_class must be positive");
    }
    if (!(spec.spread >= 0.0)) {
        throw ConfigError("synthetic spec: spread must be non-negative");
    }
    Rng rng(spec.seed);
    Tensor2 centers(static_cast<std::size_t>(spec.classes),
                    static_cast<std::size_t>(spec.dims));
    for (double& c : centers.v) c = rng.gaussian();

    Dataset d;
    d.num_classes = spec.classes;
    d.samples.reserve(static_cast<std::size_t>(spec.classes) *
                      static_cast<std::size_t>(spec.per_class));
    std::size_t id = 0;
    for (int c = 0; c < spec.classes; ++c) {
        for (int k = 0; k < spec.per_class; ++k) {
            std::vector<double> f(static_cast<std::size_t>(spec.dims));
            for (int j = 0; j < spec.dims; ++j) {
                f[static_cast<std::size_t>(j)] =
                    centers.at(static_cast<std::size_t>(c),
                               static_cast<std::size_t>(j)) +
                    spec.spread * rng.gaussian();
            }
            d.samples.push_back(make_sample(id++, std::move(f), c, spec.classes));
        }
    }
    return d;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file_bytes(images_path);
    const auto lab = read_file_bytes(labels_path);

    const std::uint32_t img_magic = read_be_u32(img, 0, images_path);
    if (img_magic != 0x00000803u) {
        throw FormatError(images_path + ": bad magic 0x" +
                          [&] {
                              char buf[16];
                              std::snprintf(buf, sizeof buf, "%08x", img_magic);
                              return std::string(buf);
                          }() +
                          " at byte offset 0, expected 0x00000803");
    }
    const std::uint32_t n = read_be_u32(img, 4, images_path);
    const std::uint32_t h = read_be_u32(img, 8, images_path);
    const std::uint32_t w = read_be_u32(img, 12, images_path);
    const std::size_t pixels = static_cast<std::size_t>(h) * w;
    const std::size_t want = 16 + static_cast<std::size_t>(n) * pixels;
    if (img.size() != want) {
        throw FormatError(images_path + ": payload ends at byte offset " +
                          std::to_string(img.size()) + ", expected " +
                          std::to_string(want));
    }

    const std::uint32_t lab_magic = read_be_u32(lab, 0, labels_path);
    if (lab_magic != 0x00000801u) {
        throw FormatError(labels_path + ": bad magic at byte offset 0, expected 0x00000801");
    }
    const std::uint32_t ln = read_be_u32(lab, 4, labels_path);
    if (ln != n) {
        throw FormatError(labels_path + ": item count " + std::to_string(ln) +
                          " at byte offset 4 does not match image count " +
                          std::to_string(n));
    }
    if (lab.size() != 8 + static_cast<std::size_t>(n)) {
        throw FormatError(labels_path + ": payload ends at byte offset " +
                          std::to_string(lab.size()) + ", expected " +
                          std::to_string(8 + static_cast<std::size_t>(n)));
    }

    Dataset d;
    d.num_classes = 10;
    d.samples.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(lab[8 + i]);
        if (label > 9) {
            throw FormatError(labels_path + ": label " + std::to_string(label) +
                              " out of range at byte offset " +
                              std::to_string(8 + i));
        }
        std::vector<double> f(pixels);
        const std::size_t base = 16 + static_cast<std::size_t>(i) * pixels;
        for (std::size_t p = 0; p < pixels; ++p) {
            f[p] = static_cast<double>(img[base + p]) / 255.0;
        }
        d.samples.push_back(make_sample(i, std::move(f), label, 10));
    }
    return d;
}

Dataset load_cifar10(const std::vector<std::string>& batch_paths) {
    if (batch_paths.empty()) {
        throw InputError("load_cifar10: no batch files given");
    }
    constexpr std::size_t kRecord = 3073; // 1 label byte + 32*32*3 pixels
    Dataset d;
    d.num_classes = 10;
    std::size_t id = 0;
    for (const auto& path : batch_paths) {
        const auto bytes = read_file_bytes(path);
        if (bytes.empty() || bytes.size() % kRecord != 0) {
            throw FormatError(path + ": size " + std::to_string(bytes.size()) +
                              " is not a multiple of the " +
                              std::to_string(kRecord) +
                              "-byte record stride; stray data at byte offset " +
                              std::to_string(bytes.size() - bytes.size() % kRecord));
        }
        const std::size_t count = bytes.size() / kRecord;
        d.samples.reserve(d.samples.size() + count);
        for (std::size_t r = 0; r < count; ++r) {
            const std::size_t base = r * kRecord;
            const int label = static_cast<int>(bytes[base]);
            if (label > 9) {
                throw FormatError(path + ": label " + std::to_string(label) +
                                  " out of range at byte offset " +
                                  std::to_string(base));
            }
            std::vector<double> f(kRecord - 1);
            for (std::size_t p = 0; p < kRecord - 1; ++p) {
                f[p] = static_cast<double>(bytes[base + 1 + p]) / 255.0;
            }
            d.samples.push_back(make_sample(id++, std::move(f), label, 10));
        }
    }
    return d;
}

namespace {
constexpr char kDatasetMagic[8] = {'A', 'C', 'S', 'D', 'A', 'T', 'A', '1'};
}

void save_dataset(const Dataset& d, const std::string& path) {
    d.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot open file for write: " + path);
    }
    out.write(kDatasetMagic, sizeof kDatasetMagic);
    write_pod(out, std::uint32_t{1});
    write_pod(out, static_cast<std::int32_t>(d.num_classes));
    write_pod(out, static_cast<std::uint64_t>(d.size()));
    write_pod(out, static_cast<std::uint64_t>(d.feature_dim()));
    for (const auto& s : d.samples) {
        write_pod(out, static_cast<std::int32_t>(s.label));
        out.write(reinterpret_cast<const char*>(s.features.data()),
                  static_cast<std::streamsize>(s.features.size() * sizeof(double)));
    }
    write_pod(out, static_cast<std::uint64_t>(d.noisy_ids.size()));
    for (std::size_t id : d.noisy_ids) {
        write_pod(out, static_cast<std::uint64_t>(id));
    }
    if (!out) {
        throw InputError("write failed: " + path);
    }
}

Dataset load_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open file: " + path);
    }
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kDatasetMagic, sizeof magic) != 0) {
        throw FormatError(path + ": bad magic at byte offset 0");
    }
    std::uint32_t version = 0;
    read_pod(in, version, path);
    if (version != 1) {
        throw FormatError(path + ": unsupported version " +
                          std::to_string(version) + " at byte offset 8");
    }
    std::int32_t num_classes = 0;
    std::uint64_t n = 0, dim = 0;
    read_pod(in, num_classes, path);
    read_pod(in, n, path);
    read_pod(in, dim, path);

    Dataset d;
    d.num_classes = num_classes;
    d.samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::int32_t label = 0;
        read_pod(in, label, path);
        std::vector<double> f(dim);
        in.read(reinterpret_cast<char*>(f.data()),
                static_cast<std::streamsize>(dim * sizeof(double)));
        if (!in) {
            throw FormatError(path + ": truncated at byte offset " +
                              std::to_string(static_cast<long long>(in.tellg())));
        }
        d.samples.push_back(make_sample(static_cast<std::size_t>(i), std::move(f),
                                        label, num_classes));
    }
    std::uint64_t noisy_count = 0;
    read_pod(in, noisy_count, path);
    for (std::uint64_t i = 0; i < noisy_count; ++i) {
        std::uint64_t id = 0;
        read_pod(in, id, path);
        d.noisy_ids.insert(static_cast<std::size_t>(id));
    }
    d.validate();
    return d;
}

Dataset inject_label_noise(Dataset d, double rho, std::uint64_t seed) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw ConfigError("inject_label_noise: rho must lie in [0, 1]");
    }
    if (!d.noisy_ids.empty()) {
        throw StateError("inject_label_noise: dataset already carries noise");
    }
    const auto n = d.size();
    const auto corrupt =
        static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
    if (corrupt == 0) {
        return d;
    }
    if (d.num_classes < 2) {
        throw ConfigError("inject_label_noise: need at least 2 classes");
    }

    Rng rng(seed);
    std::vector<std::size_t> ids = d.all_ids();
    // Partial Fisher-Yates: the first `corrupt` slots end up holding a
    // uniform sample without replacement.
    for (std::size_t i = 0; i < corrupt; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(ids[i], ids[j]);
    }
    for (std::size_t i = 0; i < corrupt; ++i) {
        auto& s = d.samples[ids[i]];
        const auto offset = static_cast<int>(
            rng.below(static_cast<std::uint64_t>(d.num_classes - 1)));
        const int wrong = offset >= s.label ? offset + 1 : offset;
        s.label = wrong;
        s.label_one_hot = one_hot(static_cast<std::size_t>(d.num_classes),
                                  static_cast<std::size_t>(wrong));
        d.noisy_ids.insert(s.id);
    }
    return d;
}

double noisy_recall(const std::vector<std::size_t>& pruned_ids,
                    const std::set<std::size_t>& noisy_ids) {
    if (noisy_ids.empty()) {
        throw InputError("noisy_recall: empty noisy id set");
    }
    std::size_t hit = 0;
    for (std::size_t id : pruned_ids) {
        if (noisy_ids.count(id) != 0) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(noisy_ids.size());
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& d,
                                             double test_fraction,
                                             std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("split_train_test: test_fraction must lie in (0, 1)");
    }
    if (!d.noisy_ids.empty()) {
        throw StateError("split_train_test: split before injecting noise");
    }
    const std::size_t n = d.size();
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n) {
        throw ConfigError("split_train_test: split leaves an empty side");
    }

    std::vector<std::size_t> ids = d.all_ids();
    Rng rng(seed);
    rng.shuffle(ids);
    std::vector<std::size_t> test_ids(ids.begin(), ids.begin() + n_test);
    std::vector<std::size_t> train_ids(ids.begin() + n_test, ids.end());
    std::sort(test_ids.begin(), test_ids.end());
    std::sort(train_ids.begin(), train_ids.end());

    auto build = [&](const std::vector<std::size_t>& take) {
        Dataset out;
        out.num_classes = d.num_classes;
        out.samples.reserve(take.size());
        std::size_t id = 0;
        for (std::size_t src : take) {
            const auto& s = d.samples[src];
            out.samples.push_back(
                make_sample(id++, s.features, s.label, d.num_classes));
        }
        return out;
    };
    return {build(train_ids), build(test_ids)};
}

} // namespace acs
