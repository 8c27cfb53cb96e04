import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from densecap import AnnotationSet, Corpus, TimeInterval, VideoMeta, VideoRecord


def make_video(video_id, duration, gt_sets, predictions=(), fps=25.0):
    """Assemble a VideoRecord from raw [start, end] pairs and sentences."""
    ann_sets = []
    for intervals, sentences in gt_sets:
        ann_sets.append(AnnotationSet([TimeInterval(*p) for p in intervals],
                                      list(sentences)))
    return VideoRecord(VideoMeta(video_id, duration, fps=fps), ann_sets,
                       list(predictions))


def make_corpus(**videos):
    return Corpus(videos=dict(videos))


def pytest_terminal_summary(terminalreporter):
    """Print one pass/fail line per release criterion after the test run."""
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("release criteria")
        for status, name in test_acceptance.RESULTS:
            terminalreporter.write_line(f"[{status}] {name}")


@pytest.fixture
def simple_meta():
    # 16 s at 16 fps with 64-frame segments: four 4 s segments
    return VideoMeta("v1", 16.0, fps=16.0, frames_per_segment=64)
