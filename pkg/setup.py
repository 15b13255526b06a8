from setuptools import setup, find_packages
setup(
    name='stgcnn-inverse',
    version='0.1',
    packages=find_packages(exclude=["examples*"]),
    entry_points={"console_scripts": ["stgcnn-inverse=src.cli:main"]}
)
