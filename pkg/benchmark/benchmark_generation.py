import statistics
import time

from laryngen.exceptions import GenerationFailure
from laryngen.plan import compile_plan, derive_seed
from laryngen.samples import make_sample_background
from laryngen.scene import scene_for_group
from laryngen.search import SearchOptions
from laryngen.synth import run_plan

# Settings
IMAGES = 50        # images per configuration
MASTER_SEED = 0

CONFIGS = {
    "best-first": SearchOptions(),
    "best-first +col": SearchOptions(column_penalty=True),
    "exhaustive": SearchOptions(exhaustive=True),
}


def run_benchmark(group, options):
    background = make_sample_background()
    scene = scene_for_group(group)
    latencies = []
    failures = 0
    for i in range(IMAGES):
        start = time.perf_counter()
        try:
            run_plan(background, compile_plan(scene, background, derive_seed(MASTER_SEED, i)), options)
        except GenerationFailure:
            failures += 1
        latencies.append(time.perf_counter() - start)

    latencies.sort()
    return {
        "Img/s": round(len(latencies) / sum(latencies), 2),
        "Avg": round(statistics.mean(latencies), 4),
        "p50": round(statistics.median(latencies), 4),
        "p95": round(latencies[int(0.95 * len(latencies)) - 1], 4),
        "Max": round(latencies[-1], 4),
        "Failed": failures,
    }


def print_table(group, results):
    print("=" * 80)
    print(f"Group: {group}")
    print(f"{'Search':<18} {'Img/s':<8} {'Avg(s)':<10} {'p50':<8} {'p95':<8} {'Max':<8} {'Failed':<8}")
    print("-" * 80)
    for name, s in results.items():
        print(f"{name:<18} {s['Img/s']:<8} {s['Avg']:<10} {s['p50']:<8} {s['p95']:<8} "
              f"{s['Max']:<8} {s['Failed']:<8}")
    print("=" * 80)


def main():
    for group in (1, 2, 3):
        print(f"\n🚀 Benchmarking group {group} ...")
        results = {name: run_benchmark(group, options) for name, options in CONFIGS.items()}
        print_table(group, results)


if __name__ == "__main__":
    main()
