"""Runs each subcommand once and validates the reports against the schema."""

import json
import subprocess
import sys
from pathlib import Path

import jsonschema


def main():
    cli, schema_path, data, work = sys.argv[1:5]
    data, work = Path(data), Path(work)
    work.mkdir(parents=True, exist_ok=True)
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)

    sim_config = work / "sim.json"
    sim_config.write_text(json.dumps({
        "simulation": {"experiment": "consistency", "n_grid": [100, 200], "replications": 5,
                       "model": {"threshold": 2}},
    }))
    val_config = work / "val.json"
    val_config.write_text(json.dumps({"validation": {"instances": 2, "mc_replications": 500}}))
    schools = ["--units", data / "schools_units.csv", "--edges", data / "schools_edges.csv",
              "--config", data / "schools_config.json"]
    runs = {
        "estimate": ["estimate", *schools, "--alpha", "0.05", "--alpha", "0.025"],
        "simulate": ["simulate", "--config", sim_config],
        "validate": ["validate", "--config", val_config],
    }
    for name, args in runs.items():
        out = work / f"{name}.json"
        subprocess.run([cli, *map(str, args), "--out", str(out)], check=True)
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
        print(f"{name}: report valid")
    estimate = json.loads((work / "estimate.json").read_text())
    assert [i["alpha"] for i in estimate["intervals"]] == [0.05, 0.025]
    del estimate["intervals"]
    try:
        jsonschema.validate(estimate, schema, cls=jsonschema.Draft202012Validator)
    except jsonschema.ValidationError:
        print("estimate without intervals: rejected")
    else:
        sys.exit("schema accepted an estimate report without intervals")


if __name__ == "__main__":
    main()
