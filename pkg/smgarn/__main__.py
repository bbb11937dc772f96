from smgarn.cli import main

raise SystemExit(main())
