#pragma once

#include <stdexcept>
#include <string>

namespace fitrec {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// geometry
struct EmptyCloud : Error {
    explicit EmptyCloud(const std::string& m = "point cloud is empty") : Error(m) {}
};
struct DegenerateCloud : Error {
    explicit DegenerateCloud(const std::string& m = "all points coincide") : Error(m) {}
};

// dataset / io
struct IoError : Error {
    explicit IoError(const std::string& m) : Error(m) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error(m), line(0) {}
    ParseError(const std::string& m, int line_no)
        : Error(m + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    int line;  // 0 when the format has no line structure (binary files)
};
struct UnknownLabel : Error {
    explicit UnknownLabel(const std::string& label)
        : Error("unknown label: " + label) {}
};
struct EmptyClass : Error {
    explicit EmptyClass(const std::string& label)
        : Error("class has no samples: " + label) {}
};

// synthetic scanner
struct InvalidSpec : Error {
    explicit InvalidSpec(const std::string& m) : Error(m) {}
};
struct ScannerInsideObject : Error {
    explicit ScannerInsideObject(const std::string& m = "scanner position lies inside the object's bounding sphere")
        : Error(m) {}
};

// view selection
struct TooFewPoints : Error {
    explicit TooFewPoints(const std::string& m = "need at least 3 points") : Error(m) {}
};
struct DegenerateGeometry : Error {
    explicit DegenerateGeometry(const std::string& m = "points are collinear") : Error(m) {}
};

// renderer
struct NotNormalized : Error {
    explicit NotNormalized(const std::string& m = "cloud is not unit-sphere normalized") : Error(m) {}
};
struct ZeroPoints : Error {
    explicit ZeroPoints(const std::string& m = "point count is zero") : Error(m) {}
};

// neural
struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& m) : Error(m) {}
};
struct EmptyTrainSet : Error {
    explicit EmptyTrainSet(const std::string& m = "training set is empty") : Error(m) {}
};

// eval
struct EmptyRecords : Error {
    explicit EmptyRecords(const std::string& m = "no prediction records") : Error(m) {}
};
struct EmptyDatabase : Error {
    explicit EmptyDatabase(const std::string& m = "retrieval database is empty") : Error(m) {}
};
struct NoRelevantItems : Error {
    explicit NoRelevantItems(const std::string& m = "ranking contains no relevant item") : Error(m) {}
};
struct EmptyInput : Error {
    explicit EmptyInput(const std::string& m = "empty input") : Error(m) {}
};

}  // namespace fitrec
