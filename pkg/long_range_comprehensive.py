import json
import logging

from chunkstack.data.synth import SignalKind, SynthSpec
from chunkstack.pipeline.experiment import (
    ALL_VARIANTS,
    BAG_OF_WORDS,
    HIERARCHICAL,
    TRUNCATION,
    run_experiment,
)

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
logger = logging.getLogger(__name__)

# Long-range corpus: the label needs a trigger in chunk 1 and its partner past token 300
spec = SynthSpec(
    signal_kind=SignalKind.LONG_RANGE_PAIR,
    n_docs=2000,
    n_test_docs=500,
    vocab_size=500,
    doc_len_mean=600,
    doc_len_jitter=50,
    signal_offset_tokens=300,
    content_len=202,
    seed=0,
)

TARGETS = {
    HIERARCHICAL: ("min", 0.90),
    TRUNCATION: ("max", 0.60),
    BAG_OF_WORDS: ("max", 0.60),
}


def print_results(result):
    """Print the comparison table and the pass/fail status of each target"""
    print("\n=== Long-Range Separation ===")
    print(f"Chance level (test label marginals): {result.chance:.4f}")
    print("\n" + result.to_frame().to_string(float_format=lambda v: f"{v:.4f}"))

    print("\nTargets:")
    for name, (bound, value) in TARGETS.items():
        accuracy = result.row(name).accuracy
        ok = accuracy >= value if bound == "min" else accuracy <= value
        print(f"{name}: accuracy {accuracy:.4f} ({bound} {value:.2f}) -> {'PASS' if ok else 'FAIL'}")

    gap = result.ordering_gap()
    print(f"\nTransformer minus mean aggregation: {gap:+.4f}")
    if gap < -0.05:
        print("Ordering inverted")
    elif gap < 0.05:
        print("Gap below 0.05 (reported only)")


def main():
    try:
        logger.info("Running long-range separation experiment")
        result = run_experiment(
            spec, variants=ALL_VARIANTS
        )
        print_results(result)

        # Save results to file for reference
        with open('long_range_results.json', 'w') as f:
            json.dump(result.model_dump(mode="json"), f, indent=2)
        print("\nDetailed results saved to 'long_range_results.json'")

    except Exception as e:
        logger.error(f"Experiment failed: {str(e)}", exc_info=True)
        print(f"Error: {e}")

if __name__ == "__main__":
    main()
