#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "eegbench/ingest.hpp"

namespace eegbench::ingest {

namespace {

constexpr const char* kAnnotationLabel = "EDF Annotations";

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(' ');
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(' ');
    return std::string(s.substr(begin, end - begin + 1));
}

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::string field(std::size_t width, const char* name) {
        if (pos_ + width > bytes_.size())
            throw FormatError(std::string("EDF truncated while reading header field '") + name + "'");
        std::string out(reinterpret_cast<const char*>(bytes_.data() + pos_), width);
        pos_ += width;
        return trim(out);
    }

    std::int64_t integer(std::size_t width, const char* name) {
        const auto text = field(width, name);
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
            throw FormatError(std::string("EDF field '") + name + "' is not an integer: '" + text + "'");
        return value;
    }

    double real(std::size_t width, const char* name) {
        const auto text = field(width, name);
        char* end = nullptr;
        const double value = std::strtod(text.c_str(), &end);
        if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(value))
            throw FormatError(std::string("EDF field '") + name + "' is not a number: '" + text + "'");
        return value;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::string pad(std::string text, std::size_t width) {
    if (text.size() > width) text.resize(width);
    text.append(width - text.size(), ' ');
    return text;
}

// Shortest decimal representation that fits in `width` characters.
std::string format_number(double value, std::size_t width) {
    char buf[64];
    for (int precision = 15; precision >= 1; --precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, value);
        std::string s(buf);
        if (s.size() <= width && s.find('e') == std::string::npos) return s;
    }
    throw DomainError("EDF: value " + std::to_string(value) + " cannot be represented in header field");
}

double reparse(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

std::string format_onset(double seconds) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.9f", seconds);
    std::string s(buf);
    // strip trailing zeros but keep at least one decimal digit
    while (s.size() > 2 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
    return s;
}

// Time-stamped annotation lists: +onset[\x15duration]\x14text\x14...\x14\x00
void parse_tals(std::span<const std::uint8_t> raw, double fs, std::vector<Event>& events) {
    std::size_t i = 0;
    while (i < raw.size()) {
        if (raw[i] == 0) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < raw.size() && raw[end] != 0) ++end;
        std::string tal(reinterpret_cast<const char*>(raw.data() + i), end - i);
        i = end + 1;

        std::vector<std::string> parts;
        std::size_t start = 0;
        for (std::size_t k = 0; k < tal.size(); ++k) {
            if (tal[k] == '\x14') {
                parts.push_back(tal.substr(start, k - start));
                start = k + 1;
            }
        }
        if (start < tal.size()) parts.push_back(tal.substr(start));
        if (parts.empty()) continue;

        std::string onset_text = parts[0];
        if (auto dur = onset_text.find('\x15'); dur != std::string::npos) onset_text.resize(dur);
        char* endp = nullptr;
        const double onset = std::strtod(onset_text.c_str(), &endp);
        if (onset_text.empty() || endp != onset_text.c_str() + onset_text.size())
            throw FormatError("EDF annotation onset is not a number: '" + onset_text + "'");
        for (std::size_t k = 1; k < parts.size(); ++k) {
            if (parts[k].empty()) continue;  // time-keeping annotation
            events.push_back({static_cast<std::int64_t>(std::llround(onset * fs)), parts[k]});
        }
    }
}

}  // namespace

void Recording::validate() const {
    if (!(fs > 0.0)) throw DomainError("Recording: sampling rate must be positive");
    if (static_cast<std::size_t>(samples.rows()) != channel_names.size())
        throw DomainError("Recording: channel name count does not match sample rows");
    for (const auto& ev : events)
        if (ev.sample < 0 || ev.sample >= samples.cols())
            throw DomainError("Recording: event index out of bounds");
}

EdfHeader parse_edf_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 256) throw FormatError("EDF truncated: stream shorter than the 256-byte fixed header");
    HeaderReader rd(bytes);
    EdfHeader h;
    h.version = rd.field(8, "version");
    h.patient_id = rd.field(80, "patient");
    h.recording_id = rd.field(80, "recording");
    h.start_date = rd.field(8, "startdate");
    h.start_time = rd.field(8, "starttime");
    h.header_bytes = rd.integer(8, "header bytes");
    h.reserved = rd.field(44, "reserved");
    h.n_records = rd.integer(8, "number of records");
    h.record_duration = rd.real(8, "record duration");
    const auto ns = rd.integer(4, "number of signals");
    if (ns < 1) throw FormatError("EDF declares no signals");
    if (h.header_bytes != 256 + 256 * ns)
        throw FormatError("EDF header_bytes " + std::to_string(h.header_bytes) + " != 256 + 256*" + std::to_string(ns));
    if (bytes.size() < static_cast<std::size_t>(h.header_bytes))
        throw FormatError("EDF truncated inside the signal header block");

    const auto n = static_cast<std::size_t>(ns);
    h.signals.resize(n);
    for (auto& s : h.signals) s.label = rd.field(16, "label");
    for (auto& s : h.signals) s.transducer = rd.field(80, "transducer");
    for (auto& s : h.signals) s.physical_dimension = rd.field(8, "physical dimension");
    for (auto& s : h.signals) s.physical_min = rd.real(8, "physical minimum");
    for (auto& s : h.signals) s.physical_max = rd.real(8, "physical maximum");
    for (auto& s : h.signals) s.digital_min = rd.integer(8, "digital minimum");
    for (auto& s : h.signals) s.digital_max = rd.integer(8, "digital maximum");
    for (auto& s : h.signals) s.prefiltering = rd.field(80, "prefiltering");
    for (auto& s : h.signals) s.samples_per_record = rd.integer(8, "samples per record");

    for (const auto& s : h.signals) {
        if (s.digital_max == s.digital_min)
            throw FormatError("EDF signal '" + s.label + "' has digital_min == digital_max");
        if (!(s.physical_max > s.physical_min) || !(s.digital_max > s.digital_min))
            throw FormatError("EDF signal '" + s.label + "' has an empty physical or digital range");
        if (s.samples_per_record < 1)
            throw FormatError("EDF signal '" + s.label + "' has no samples per record");
    }
    if (!(h.record_duration > 0.0)) throw FormatError("EDF record duration must be positive");

    std::int64_t record_bytes = 0;
    for (const auto& s : h.signals) record_bytes += 2 * s.samples_per_record;
    const auto payload = static_cast<std::int64_t>(bytes.size()) - h.header_bytes;
    if (h.n_records < 0) h.n_records = payload / record_bytes;  // -1: unknown at acquisition time
    if (payload < h.n_records * record_bytes)
        throw FormatError("EDF truncated: " + std::to_string(payload) + " data bytes for " +
                          std::to_string(h.n_records) + " records of " + std::to_string(record_bytes));
    return h;
}

Recording parse_edf(std::span<const std::uint8_t> bytes) {
    const EdfHeader h = parse_edf_header(bytes);

    std::vector<std::size_t> data_signals;
    std::vector<std::size_t> annotation_signals;
    for (std::size_t i = 0; i < h.signals.size(); ++i)
        (h.signals[i].is_annotation() ? annotation_signals : data_signals).push_back(i);
    if (data_signals.empty()) throw FormatError("EDF contains only annotation signals");

    const auto spr = h.signals[data_signals.front()].samples_per_record;
    for (auto i : data_signals)
        if (h.signals[i].samples_per_record != spr)
            throw FormatError("EDF signals with differing sampling rates are not supported");

    Recording rec;
    rec.fs = static_cast<double>(spr) / h.record_duration;
    for (auto i : data_signals) rec.channel_names.push_back(h.signals[i].label);
    rec.samples.resize(static_cast<Index>(data_signals.size()), h.n_records * spr);

    std::vector<std::uint8_t> annotation_bytes;
    std::size_t pos = static_cast<std::size_t>(h.header_bytes);
    for (std::int64_t r = 0; r < h.n_records; ++r) {
        std::size_t row = 0;
        for (std::size_t i = 0; i < h.signals.size(); ++i) {
            const auto& sig = h.signals[i];
            const auto n = static_cast<std::size_t>(sig.samples_per_record);
            if (sig.is_annotation()) {
                annotation_bytes.insert(annotation_bytes.end(), bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                        bytes.begin() + static_cast<std::ptrdiff_t>(pos + 2 * n));
                annotation_bytes.push_back(0);
            } else {
                const double gain = sig.gain();
                const double offset = sig.physical_min - gain * static_cast<double>(sig.digital_min);
                for (std::size_t k = 0; k < n; ++k) {
                    const auto lo = bytes[pos + 2 * k];
                    const auto hi = bytes[pos + 2 * k + 1];
                    const auto digital = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
                    rec.samples(static_cast<Index>(row), r * spr + static_cast<Index>(k)) =
                        offset + gain * static_cast<double>(digital);
                }
                ++row;
            }
            pos += 2 * n;
        }
    }
    if (!annotation_signals.empty()) parse_tals(annotation_bytes, rec.fs, rec.events);
    std::erase_if(rec.events, [&](const Event& e) { return e.sample < 0 || e.sample >= rec.samples.cols(); });
    return rec;
}

std::vector<std::uint8_t> write_edf(const Recording& rec, const EdfWriteOptions& opt) {
    if (rec.samples.rows() < 1) throw DomainError("write_edf: recording has no channels");
    rec.validate();
    if (!rec.samples.allFinite()) throw DomainError("write_edf: non-finite sample");

    // Quantize with the exact values the header will carry.
    const std::string pmin_text = format_number(opt.physical_min, 8);
    const std::string pmax_text = format_number(opt.physical_max, 8);
    const double pmin = reparse(pmin_text);
    const double pmax = reparse(pmax_text);
    if (!(pmax > pmin) || !(opt.digital_max > opt.digital_min))
        throw DomainError("write_edf: empty physical or digital range");
    if (opt.digital_min < -32768 || opt.digital_max > 32767)
        throw DomainError("write_edf: digital range exceeds 16-bit storage");
    if (rec.samples.minCoeff() < pmin || rec.samples.maxCoeff() > pmax)
        throw DomainError("write_edf: sample outside declared physical range [" + pmin_text + ", " + pmax_text + "]");

    const double spr_real = rec.fs * opt.record_duration;
    const auto spr = static_cast<std::int64_t>(std::llround(spr_real));
    if (spr < 1 || std::abs(spr_real - static_cast<double>(spr)) > 1e-9)
        throw DomainError("write_edf: fs * record_duration must be a whole number of samples");
    const std::string duration_text = format_number(opt.record_duration, 8);

    const auto n_samples = rec.samples.cols();
    const std::int64_t n_records = std::max<std::int64_t>(1, (n_samples + spr - 1) / spr);

    // Annotation payload per record: time-keeping TAL plus the events it owns.
    const bool with_events = !rec.events.empty();
    std::vector<std::string> tal_per_record;
    std::int64_t annotation_spr = 0;
    if (with_events) {
        tal_per_record.resize(static_cast<std::size_t>(n_records));
        for (std::int64_t r = 0; r < n_records; ++r) {
            tal_per_record[static_cast<std::size_t>(r)] =
                format_onset(static_cast<double>(r) * opt.record_duration) + "\x14\x14" + std::string(1, '\0');
        }
        for (const auto& ev : rec.events) {
            const auto r = std::min<std::int64_t>(ev.sample / spr, n_records - 1);
            auto& tal = tal_per_record[static_cast<std::size_t>(r)];
            tal += format_onset(static_cast<double>(ev.sample) / rec.fs) + "\x14" + ev.label + "\x14" + std::string(1, '\0');
        }
        std::size_t longest = 0;
        for (const auto& t : tal_per_record) longest = std::max(longest, t.size());
        annotation_spr = static_cast<std::int64_t>((longest + 1) / 2 + 1);
    }

    const auto n_data = static_cast<std::size_t>(rec.samples.rows());
    const std::size_t ns = n_data + (with_events ? 1 : 0);

    std::string header;
    header += pad("0", 8);
    header += pad(opt.patient_id, 80);
    header += pad(opt.recording_id, 80);
    header += pad("01.01.00", 8);
    header += pad("00.00.00", 8);
    header += pad(std::to_string(256 + 256 * ns), 8);
    header += pad(with_events ? "EDF+C" : "", 44);
    header += pad(std::to_string(n_records), 8);
    header += pad(duration_text, 8);
    header += pad(std::to_string(ns), 4);

    auto per_signal = [&](auto&& data_value, auto&& annotation_value, std::size_t width) {
        for (std::size_t i = 0; i < n_data; ++i) header += pad(data_value(i), width);
        if (with_events) header += pad(annotation_value(), width);
    };
    per_signal([&](std::size_t i) { return rec.channel_names[i]; }, [] { return std::string(kAnnotationLabel); }, 16);
    per_signal([](std::size_t) { return std::string("AgAgCl electrode"); }, [] { return std::string(); }, 80);
    per_signal([&](std::size_t) { return opt.physical_dimension; }, [] { return std::string(); }, 8);
    per_signal([&](std::size_t) { return pmin_text; }, [] { return std::string("-1"); }, 8);
    per_signal([&](std::size_t) { return pmax_text; }, [] { return std::string("1"); }, 8);
    per_signal([&](std::size_t) { return std::to_string(opt.digital_min); }, [] { return std::string("-32768"); }, 8);
    per_signal([&](std::size_t) { return std::to_string(opt.digital_max); }, [] { return std::string("32767"); }, 8);
    per_signal([](std::size_t) { return std::string(); }, [] { return std::string(); }, 80);
    per_signal([&](std::size_t) { return std::to_string(spr); }, [&] { return std::to_string(annotation_spr); }, 8);
    per_signal([](std::size_t) { return std::string(); }, [] { return std::string(); }, 32);

    std::vector<std::uint8_t> out(header.begin(), header.end());
    const std::size_t record_bytes = 2 * (n_data * static_cast<std::size_t>(spr) + static_cast<std::size_t>(annotation_spr));
    out.reserve(out.size() + record_bytes * static_cast<std::size_t>(n_records));

    const double gain = (pmax - pmin) / static_cast<double>(opt.digital_max - opt.digital_min);
    for (std::int64_t r = 0; r < n_records; ++r) {
        for (std::size_t c = 0; c < n_data; ++c) {
            for (std::int64_t k = 0; k < spr; ++k) {
                const auto t = r * spr + k;
                std::int64_t digital = 0;
                if (t < n_samples) {
                    const double x = rec.samples(static_cast<Index>(c), t);
                    digital = std::llround((x - pmin) / gain) + opt.digital_min;
                    digital = std::clamp(digital, opt.digital_min, opt.digital_max);
                } else {
                    digital = std::clamp<std::int64_t>(std::llround(-pmin / gain) + opt.digital_min, opt.digital_min,
                                                       opt.digital_max);
                }
                const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(digital));
                out.push_back(static_cast<std::uint8_t>(u & 0xff));
                out.push_back(static_cast<std::uint8_t>(u >> 8));
            }
        }
        if (with_events) {
            std::string tal = tal_per_record[static_cast<std::size_t>(r)];
            tal.resize(static_cast<std::size_t>(2 * annotation_spr), '\0');
            out.insert(out.end(), tal.begin(), tal.end());
        }
    }
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Recording read_edf_file(const std::filesystem::path& path) { return parse_edf(read_file(path)); }

void write_edf_file(const std::filesystem::path& path, const Recording& rec, const EdfWriteOptions& options) {
    write_file(path, write_edf(rec, options));
}

}  // namespace eegbench::ingest
