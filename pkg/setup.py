from setuptools import find_packages, setup


def readme():
    with open("README.md") as f:
        return f.read()


setup(
    name="scorehazard",
    version="0.1.0",
    description="Survival analysis over classifier scores for model explanation.",
    long_description=readme(),
    long_description_content_type="text/markdown",
    packages=find_packages("src"),
    package_dir={"": "src"},
    keywords="Survival analysis, Explainability, Cox model",
    install_requires=["numpy", "scipy", "matplotlib", "pandas>=1.5"],
    entry_points={"console_scripts": ["scorehazard=scorehazard.cli:run_cli"]},
)
