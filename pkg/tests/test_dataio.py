"""Tests for feature files, manifests and the synthetic generator."""

import struct

import numpy as np
import pytest

from src.crosslabel_vad.config import SynthConfig
from src.crosslabel_vad.dataio import (
    MANIFEST_FILE,
    FeatureSequence,
    decode_features,
    encode_features,
    generate_synthetic_dataset,
    load_dataset,
    nearest_centroid_scores,
    parse_manifest,
    read_features,
    synthesize,
    write_features,
)
from src.crosslabel_vad.dataio.manifest import write_categories
from src.crosslabel_vad.dataio.synthetic import ramp_amplitude
from src.crosslabel_vad.evaluation.metrics import frame_ap
from src.crosslabel_vad.exceptions import (
    BadMagicError,
    DimensionMismatchError,
    DimensionOverflowError,
    FeatureFormatError,
    LabelRangeError,
    ManifestError,
    MissingFileError,
    TruncatedPayloadError,
    VersionMismatchError,
)

SMALL = SynthConfig(
    num_videos=6,
    dim=4,
    num_categories=3,
    min_length=40,
    max_length=48,
    min_segment=4,
    max_segment=8,
    seed=7,
)


HEADER_LINE = "video_id\tfeature_path\tlabels\tgt_path"


def _write_manifest(path, rows, d=2, m=3):
    lines = [f"# d={d}", f"# M={m}", HEADER_LINE]
    lines += ["\t".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestFeatureCodec:
    """Tests for the binary feature format."""

    def test_header_layout(self):
        """Test the header packs magic, version, n_raw and d little-endian."""
        blob = encode_features(np.zeros((3, 2), dtype=np.float32))
        assert blob[:4] == b"CPLF"
        assert struct.unpack_from("<III", blob, 4) == (1, 3, 2)
        assert len(blob) == 16 + 3 * 2 * 4

    def test_roundtrip_is_bit_exact(self, tmp_path):
        """Test float32 features survive write and read unchanged."""
        features = np.random.default_rng(0).normal(size=(5, 3)).astype(np.float32)
        path = tmp_path / "vid_0.cplf"

        write_features(path, FeatureSequence("vid_0", features))
        seq = read_features(path)

        assert seq.video_id == "vid_0"
        np.testing.assert_array_equal(seq.features, features)

    def test_bad_magic(self):
        """Test a wrong magic raises BadMagicError."""
        blob = b"XXXX" + encode_features(np.ones((1, 1)))[4:]
        with pytest.raises(BadMagicError):
            decode_features(blob)

    def test_version_mismatch(self):
        """Test an unknown version raises VersionMismatchError."""
        blob = bytearray(encode_features(np.ones((1, 1))))
        blob[4:8] = struct.pack("<I", 2)
        with pytest.raises(VersionMismatchError):
            decode_features(bytes(blob))

    def test_truncated_header(self):
        """Test a blob shorter than the header is truncated."""
        with pytest.raises(TruncatedPayloadError):
            decode_features(b"CPLF\x01")

    def test_truncated_payload_reports_sizes(self):
        """Test a short payload reports expected and actual byte counts."""
        blob = encode_features(np.ones((2, 2)))[:-4]
        with pytest.raises(TruncatedPayloadError) as exc_info:
            decode_features(blob)
        assert exc_info.value.expected == 16
        assert exc_info.value.actual == 12

    def test_zero_dimension_overflow(self):
        """Test a header declaring zero snippets is rejected."""
        blob = struct.pack("<4sIII", b"CPLF", 1, 0, 4)
        with pytest.raises(DimensionOverflowError):
            decode_features(blob)

    def test_trailing_bytes(self):
        """Test extra bytes after the payload are rejected."""
        blob = encode_features(np.ones((1, 2))) + b"\x00"
        with pytest.raises(FeatureFormatError):
            decode_features(blob)

    def test_errors_exit_with_data_code(self):
        """Test every format error maps to exit code 2."""
        with pytest.raises(FeatureFormatError) as exc_info:
            decode_features(b"")
        assert exc_info.value.exit_code == 2


class TestManifest:
    """Tests for manifest parsing and dataset loading."""

    @pytest.fixture
    def feature_dir(self, tmp_path):
        """Two feature files with d=2."""
        for vid in ("a", "b"):
            write_features(
                tmp_path / f"{vid}.cplf", FeatureSequence(vid, np.ones((4, 2)))
            )
        return tmp_path

    def test_parse_relative_paths(self, feature_dir):
        """Test paths resolve against the manifest directory."""
        path = feature_dir / "manifest.tsv"
        _write_manifest(path, [("a", "a.cplf", "0", "-"), ("b", "b.cplf", "1,2", "-")])

        manifest = parse_manifest(path)

        assert manifest.num_categories == 3
        assert manifest.entries[0].feature_path == feature_dir / "a.cplf"
        assert manifest.entries[1].labels == (1, 2)
        assert manifest.entries[0].gt_path is None

    def test_category_count_from_table(self, feature_dir):
        """Test a manifest without '# M=' takes M from categories.tsv."""
        path = feature_dir / "manifest.tsv"
        path.write_text(f"{HEADER_LINE}\na\ta.cplf\t0\t-\n")
        names = {0: "normal", 1: "riot", 4: "theft"}
        write_categories(feature_dir / "categories.tsv", names)

        manifest = parse_manifest(path)

        assert manifest.num_categories == 5

    def test_category_count_missing(self, feature_dir):
        """Test a manifest without '# M=' or a category table is rejected."""
        path = feature_dir / "manifest.tsv"
        path.write_text(f"# d=2\n{HEADER_LINE}\na\ta.cplf\t0\t-\n")

        with pytest.raises(ManifestError) as exc_info:
            parse_manifest(path)

        assert "# M=" in exc_info.value.message

    def test_duplicate_video_id(self, feature_dir):
        """Test a repeated video id is a manifest error."""
        path = feature_dir / "manifest.tsv"
        _write_manifest(path, [("a", "a.cplf", "0", "-"), ("a", "b.cplf", "0", "-")])
        with pytest.raises(ManifestError):
            parse_manifest(path)

    def test_label_out_of_range_names_video(self, feature_dir):
        """Test a label id >= M raises LabelRangeError naming the video."""
        path = feature_dir / "manifest.tsv"
        _write_manifest(path, [("a", "a.cplf", "0", "-"), ("b", "b.cplf", "5", "-")])

        with pytest.raises(LabelRangeError) as exc_info:
            load_dataset(path)

        assert exc_info.value.video_id == "b"
        assert "'b'" in exc_info.value.message

    def test_missing_feature_file(self, feature_dir):
        """Test an absent feature file raises MissingFileError."""
        path = feature_dir / "manifest.tsv"
        _write_manifest(path, [("c", "c.cplf", "0", "-")])
        with pytest.raises(MissingFileError):
            load_dataset(path)

    def test_dimension_mismatch(self, feature_dir):
        """Test features wider than the declared d are rejected."""
        write_features(feature_dir / "c.cplf", FeatureSequence("c", np.ones((4, 3))))
        path = feature_dir / "manifest.tsv"
        _write_manifest(path, [("a", "a.cplf", "0", "-"), ("c", "c.cplf", "0", "-")])
        with pytest.raises(DimensionMismatchError):
            load_dataset(path)

    def test_gt_length_must_match(self, feature_dir):
        """Test a GT file with the wrong number of lines is rejected."""
        (feature_dir / "a.txt").write_text("0\n1\n", encoding="utf-8")
        path = feature_dir / "manifest.tsv"
        _write_manifest(path, [("a", "a.cplf", "1", "a.txt")])
        with pytest.raises(DimensionMismatchError):
            load_dataset(path)


class TestSyntheticGenerator:
    """Tests for the seeded synthetic dataset."""

    def test_same_seed_same_bytes(self, tmp_path):
        """Test two generations with one config produce identical files."""
        generate_synthetic_dataset(SMALL, tmp_path / "one")
        generate_synthetic_dataset(SMALL, tmp_path / "two")

        def files(root):
            return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())

        one = files(tmp_path / "one")
        assert one == files(tmp_path / "two")
        for rel in one:
            a, b = tmp_path / "one" / rel, tmp_path / "two" / rel
            assert a.read_bytes() == b.read_bytes()

    def test_written_dataset_loads_back(self, tmp_path):
        """Test the generated manifest loads with names and GT."""
        generate_synthetic_dataset(SMALL, tmp_path)

        dataset = load_dataset(tmp_path / MANIFEST_FILE)

        assert len(dataset) == SMALL.num_videos
        assert dataset.dim == SMALL.dim
        assert dataset.category_name(0) == "normal"
        assert all(seq.gt_frames is not None for seq in dataset)

    def test_labels_agree_with_gt(self):
        """Test abnormal videos carry exactly their GT category."""
        dataset = synthesize(SMALL)
        abnormal = [seq for seq in dataset if not seq.is_normal]

        assert len(abnormal) == round(SMALL.anomaly_ratio * SMALL.num_videos)
        for seq in dataset:
            present = set(np.unique(seq.gt_frames)) - {0}
            assert present == set(seq.video_labels) - {0}

    def test_segments_respect_lengths(self):
        """Test planted runs stay within the configured segment lengths."""
        for seq in synthesize(SMALL):
            padded = np.concatenate([[0], (seq.gt_frames > 0).astype(int), [0]])
            edges = np.flatnonzero(np.diff(padded))
            for start, end in zip(edges[::2], edges[1::2]):
                assert SMALL.min_segment <= end - start <= SMALL.max_segment

    def test_ramp_amplitude_shape(self):
        """Test the ramp is 1 well inside, 0 well outside and symmetric."""
        amp = ramp_amplitude(20, [(5, 15)], width=2.0)
        assert amp[10] == 1.0
        assert amp[0] == 0.0 and amp[19] == 0.0
        np.testing.assert_allclose(amp, amp[::-1])
        assert 0.0 < amp[4] < amp[5] < 1.0

    def test_centroid_oracle_separates_planted_snippets(self):
        """Test the GT centroid oracle reaches frame AP above 0.9 by default."""
        dataset = synthesize(SynthConfig(seed=7, num_categories=7, shift_magnitude=3.0))
        scores = np.concatenate(nearest_centroid_scores(dataset))
        labels = np.concatenate([seq.gt_frames > 0 for seq in dataset])

        assert len(dataset) == 60 and dataset.dim == 32
        assert frame_ap(scores, labels.astype(int)) > 0.9
