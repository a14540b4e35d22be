import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="peering_cdn",
    version="0.1.0",
    author="Peering CDN Simulator Developers",
    license='Apache License 2.0',
    license_file='LICENSE',
    description="A deterministic simulator of auction-driven replica placement among peering CDN providers",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=['test']),
    package_data={'peering_cdn': ['scenarios/*.json', 'schemas/*.json']},
    platforms='Platform Independent',
    entry_points={
        'console_scripts': [
            'cdnpeer=peering_cdn.cli:cdnpeer'
        ]
    },
    install_requires=[
        'click~=7.1.2',
        'jsonschema>=4.0,<5',
        'tqdm~=4.56.0',
        'numpy>=1.19,<2',
    ],
    classifiers=[
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Operating System :: OS Independent",
        "Natural Language :: English",
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Topic :: Scientific/Engineering",
        "Topic :: System :: Distributed Computing",
        "Topic :: System :: Networking",
    ],
    python_requires='>=3.8',
)
