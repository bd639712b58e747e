from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # App
    APP_NAME: str = "ODBSS Subsampling"
    LOG_LEVEL: str = "INFO"

    # Maximum likelihood
    MLE_TOL: float = 1e-10  # norm of the mean weighted score
    MLE_MAX_ITER: int = 100
    MLE_SEPARATION_BOUND: float = 1e3
    MLE_MAX_HALVINGS: int = 30

    # Clustering / design space
    DBSCAN_MIN_POINTS: int = 5
    GRID_CANDIDATE_BUDGET: int = 200_000
    GRID_MIN_PARTITIONS: int = 4
    MH_DEGREES_OF_FREEDOM: float = 3.0
    MH_MAX_PROPOSALS: int = 1_000_000
    MH_MIN_ACCEPTANCE: float = 0.001
    MH_BATCH: int = 512

    # Optimal design
    DESIGN_TOL: float = 1e-4
    DESIGN_MAX_ITER: int = 10_000
    DESIGN_EXCHANGE_EVERY: int = 5
    DESIGN_PRUNE_THRESHOLD: float = 1e-8
    DESIGN_E_MAX_CUTS: int = 500

    # Sampler
    K0_FRACTION: float = 0.2
    ZETA: float = 0.95

    # Benchmark
    BENCH_REPLICATES: int = 100
    BENCH_WORKERS: int = 1

    model_config = SettingsConfigDict(env_file=".env", env_prefix="ODBSS_", extra="ignore")


settings = Settings()
